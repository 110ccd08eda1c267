#include "ecol/encoder.hpp"

#include "ecol/errors.hpp"
#include "ecol/hash.hpp"
#include "ecol/preprocess.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace ecol {

namespace {

constexpr double kLnEps = 1e-12;
constexpr double kMaskBias = -1e9;

double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return cdf + x * pdf;
}

// Row-wise layer normalization. Returns the normalized-and-scaled output and
// stashes xhat / inv_std for the backward pass.
Mat layer_norm(const Mat& x, const Vec& gain, const Vec& bias, LayerNormTrace& trace) {
    const auto rows = x.rows();
    const auto cols = x.cols();
    trace.xhat.resize(rows, cols);
    trace.inv_std.resize(rows);
    Mat out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().sum() / static_cast<double>(cols);
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        trace.inv_std[r] = inv;
        trace.xhat.row(r) = (x.row(r).array() - mean) * inv;
        out.row(r) = trace.xhat.row(r).cwiseProduct(gain.transpose()) + bias.transpose();
    }
    return out;
}

Mat layer_norm_backward(const LayerNormTrace& trace, const Vec& gain, const Mat& dy,
                        Vec& dgain, Vec& dbias) {
    const auto rows = dy.rows();
    const auto cols = dy.cols();
    Mat dx(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::RowVectorXd dxhat = dy.row(r).cwiseProduct(gain.transpose());
        const double s1 = dxhat.sum();
        const double s2 = dxhat.cwiseProduct(trace.xhat.row(r)).sum();
        dx.row(r) = (trace.inv_std[r] / static_cast<double>(cols)) *
                    (static_cast<double>(cols) * dxhat.array() - s1 -
                     trace.xhat.row(r).array() * s2);
        dgain += dy.row(r).cwiseProduct(trace.xhat.row(r)).transpose();
        dbias += dy.row(r).transpose();
    }
    return dx;
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Mat mask(rows, cols);
    const double scale = 1.0 / (1.0 - rate);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            mask(i, j) = rng.uniform() < rate ? 0.0 : scale;
        }
    }
    return mask;
}

void softmax_rows(Mat& s) {
    for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double m = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - m).exp();
        s.row(r) /= s.row(r).sum();
    }
}

void init_matrix(Mat& m, Rng& rng, double stddev) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            m(i, j) = rng.gaussian(0.0, stddev);
        }
    }
}

void allocate(EncoderParams& p, const EncoderConfig& c) {
    p.tok_emb.setZero(c.vocab_size, c.d_model);
    p.pos_emb.setZero(kMaxSeqLen, c.d_model);
    p.emb_ln_gain.setOnes(c.d_model);
    p.emb_ln_bias.setZero(c.d_model);
    p.layers.resize(c.n_layers);
    for (LayerParams& l : p.layers) {
        l.attn.wq.setZero(c.d_model, c.d_model);
        l.attn.wk.setZero(c.d_model, c.d_model);
        l.attn.wv.setZero(c.d_model, c.d_model);
        l.attn.wo.setZero(c.d_model, c.d_model);
        l.attn.bq.setZero(c.d_model);
        l.attn.bk.setZero(c.d_model);
        l.attn.bv.setZero(c.d_model);
        l.attn.bo.setZero(c.d_model);
        l.ln1_gain.setOnes(c.d_model);
        l.ln1_bias.setZero(c.d_model);
        l.w1.setZero(c.d_model, c.d_ff);
        l.b1.setZero(c.d_ff);
        l.w2.setZero(c.d_ff, c.d_model);
        l.b2.setZero(c.d_model);
        l.ln2_gain.setOnes(c.d_model);
        l.ln2_bias.setZero(c.d_model);
    }
    if (c.has_projection()) {
        p.proj_w.setZero(c.d_model, c.output_dim);
        p.proj_b.setZero(c.output_dim);
    }
}

template <typename Params, typename Ptr>
std::vector<std::pair<Ptr, size_t>> collect_blocks(Params& p) {
    std::vector<std::pair<Ptr, size_t>> blocks;
    const auto add_mat = [&](auto& m) { blocks.emplace_back(m.data(), static_cast<size_t>(m.size())); };
    add_mat(p.tok_emb);
    add_mat(p.pos_emb);
    add_mat(p.emb_ln_gain);
    add_mat(p.emb_ln_bias);
    for (auto& l : p.layers) {
        add_mat(l.attn.wq);
        add_mat(l.attn.bq);
        add_mat(l.attn.wk);
        add_mat(l.attn.bk);
        add_mat(l.attn.wv);
        add_mat(l.attn.bv);
        add_mat(l.attn.wo);
        add_mat(l.attn.bo);
        add_mat(l.ln1_gain);
        add_mat(l.ln1_bias);
        add_mat(l.w1);
        add_mat(l.b1);
        add_mat(l.w2);
        add_mat(l.b2);
        add_mat(l.ln2_gain);
        add_mat(l.ln2_bias);
    }
    if (p.proj_w.size() > 0) {
        add_mat(p.proj_w);
        add_mat(p.proj_b);
    }
    return blocks;
}

} // namespace

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

std::vector<std::pair<double*, size_t>> param_blocks(EncoderParams& p) {
    return collect_blocks<EncoderParams, double*>(p);
}

std::vector<std::pair<const double*, size_t>> param_blocks(const EncoderParams& p) {
    return collect_blocks<const EncoderParams, const double*>(p);
}

TransformerEncoder::TransformerEncoder(EncoderConfig config) : config_(config) {
    if (config_.d_model % config_.n_heads != 0) {
        throw DataError("encoder d_model must be divisible by n_heads");
    }
    allocate(params_, config_);
}

TransformerEncoder::TransformerEncoder(EncoderConfig config, uint64_t init_seed)
    : TransformerEncoder(config) {
    Rng rng(init_seed);
    constexpr double kInitStd = 0.02;
    init_matrix(params_.tok_emb, rng, kInitStd);
    init_matrix(params_.pos_emb, rng, kInitStd);
    for (LayerParams& l : params_.layers) {
        init_matrix(l.attn.wq, rng, kInitStd);
        init_matrix(l.attn.wk, rng, kInitStd);
        init_matrix(l.attn.wv, rng, kInitStd);
        init_matrix(l.attn.wo, rng, kInitStd);
        init_matrix(l.w1, rng, kInitStd);
        init_matrix(l.w2, rng, kInitStd);
    }
    if (config_.has_projection()) init_matrix(params_.proj_w, rng, kInitStd);
}

EncoderParams TransformerEncoder::zero_grads() const {
    EncoderParams g;
    allocate(g, config_);
    g.emb_ln_gain.setZero();
    for (LayerParams& l : g.layers) {
        l.ln1_gain.setZero();
        l.ln2_gain.setZero();
    }
    return g;
}

Vec TransformerEncoder::encode(const TokenSequence& seq) const {
    Trace trace;
    return forward(seq, trace, nullptr);
}

Vec TransformerEncoder::forward(const TokenSequence& seq, Trace& trace, Rng* dropout_rng) const {
    const EncoderConfig& c = config_;
    if (static_cast<int>(seq.ids.size()) != kMaxSeqLen ||
        static_cast<int>(seq.mask.size()) != kMaxSeqLen) {
        throw DataError("token sequence must have exactly 128 positions");
    }
    const bool drop = dropout_rng != nullptr && c.dropout > 0.0;
    trace.ids = seq.ids;
    trace.mask = seq.mask;
    trace.dropout_enabled = drop;
    trace.layers.assign(static_cast<size_t>(c.n_layers), LayerTrace{});

    Mat x0(kMaxSeqLen, c.d_model);
    for (int p = 0; p < kMaxSeqLen; ++p) {
        const int id = seq.ids[p];
        if (id < 0 || id >= c.vocab_size) throw DataError("token id out of vocabulary range");
        x0.row(p) = params_.tok_emb.row(id) + params_.pos_emb.row(p);
    }
    Mat h = layer_norm(x0, params_.emb_ln_gain, params_.emb_ln_bias, trace.emb_ln);
    if (drop) {
        trace.emb_mask = dropout_mask(kMaxSeqLen, c.d_model, c.dropout, *dropout_rng);
        h = h.cwiseProduct(trace.emb_mask);
    }

    const int dh = c.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int li = 0; li < c.n_layers; ++li) {
        const LayerParams& lp = params_.layers[static_cast<size_t>(li)];
        LayerTrace& lt = trace.layers[static_cast<size_t>(li)];
        lt.input = h;

        lt.q = (h * lp.attn.wq).rowwise() + lp.attn.bq.transpose();
        lt.k = (h * lp.attn.wk).rowwise() + lp.attn.bk.transpose();
        lt.v = (h * lp.attn.wv).rowwise() + lp.attn.bv.transpose();

        lt.attn.resize(static_cast<size_t>(c.n_heads));
        lt.attn_mask.resize(static_cast<size_t>(c.n_heads));
        lt.context.resize(kMaxSeqLen, c.d_model);
        for (int hi = 0; hi < c.n_heads; ++hi) {
            const auto qh = lt.q.middleCols(hi * dh, dh);
            const auto kh = lt.k.middleCols(hi * dh, dh);
            const auto vh = lt.v.middleCols(hi * dh, dh);
            Mat scores = qh * kh.transpose() * scale;
            for (int j = 0; j < kMaxSeqLen; ++j) {
                if (seq.mask[j] == 0) scores.col(j).setConstant(kMaskBias);
            }
            softmax_rows(scores);
            lt.attn[static_cast<size_t>(hi)] = scores;
            if (drop) {
                lt.attn_mask[static_cast<size_t>(hi)] =
                    dropout_mask(kMaxSeqLen, kMaxSeqLen, c.dropout, *dropout_rng);
                scores = scores.cwiseProduct(lt.attn_mask[static_cast<size_t>(hi)]);
            }
            lt.context.middleCols(hi * dh, dh) = scores * vh;
        }

        Mat attn_out = (lt.context * lp.attn.wo).rowwise() + lp.attn.bo.transpose();
        if (drop) {
            lt.out_mask = dropout_mask(kMaxSeqLen, c.d_model, c.dropout, *dropout_rng);
            attn_out = attn_out.cwiseProduct(lt.out_mask);
        }
        lt.ffn_in = layer_norm(h + attn_out, lp.ln1_gain, lp.ln1_bias, lt.ln1);

        lt.ffn_pre = (lt.ffn_in * lp.w1).rowwise() + lp.b1.transpose();
        lt.ffn_act = lt.ffn_pre.unaryExpr([](double x) { return gelu(x); });
        Mat ffn_out = (lt.ffn_act * lp.w2).rowwise() + lp.b2.transpose();
        if (drop) {
            lt.ffn_mask = dropout_mask(kMaxSeqLen, c.d_model, c.dropout, *dropout_rng);
            ffn_out = ffn_out.cwiseProduct(lt.ffn_mask);
        }
        h = layer_norm(lt.ffn_in + ffn_out, lp.ln2_gain, lp.ln2_bias, lt.ln2);
    }
    trace.final_hidden = h;

    const Vec cls = h.row(0).transpose();
    if (!c.has_projection()) return cls;
    return params_.proj_w.transpose() * cls + params_.proj_b;
}

void TransformerEncoder::backward(const Trace& trace, const Vec& grad_out,
                                  EncoderParams& grads) const {
    const EncoderConfig& c = config_;
    const bool drop = trace.dropout_enabled;

    Mat dh = Mat::Zero(kMaxSeqLen, c.d_model);
    if (c.has_projection()) {
        const Vec cls = trace.final_hidden.row(0).transpose();
        grads.proj_w += cls * grad_out.transpose();
        grads.proj_b += grad_out;
        dh.row(0) = (params_.proj_w * grad_out).transpose();
    } else {
        dh.row(0) = grad_out.transpose();
    }

    const int dh_dim = c.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh_dim));
    for (int li = c.n_layers - 1; li >= 0; --li) {
        const LayerParams& lp = params_.layers[static_cast<size_t>(li)];
        LayerParams& lg = grads.layers[static_cast<size_t>(li)];
        const LayerTrace& lt = trace.layers[static_cast<size_t>(li)];

        // dh is the gradient at the LN2 output.
        Mat dz2 = layer_norm_backward(lt.ln2, lp.ln2_gain, dh, lg.ln2_gain, lg.ln2_bias);
        Mat dffn_in = dz2;
        Mat du = dz2;
        if (drop) du = du.cwiseProduct(lt.ffn_mask);
        lg.w2 += lt.ffn_act.transpose() * du;
        lg.b2 += du.colwise().sum().transpose();
        Mat dg = du * lp.w2.transpose();
        Mat dp = dg.cwiseProduct(lt.ffn_pre.unaryExpr([](double x) { return gelu_grad(x); }));
        lg.w1 += lt.ffn_in.transpose() * dp;
        lg.b1 += dp.colwise().sum().transpose();
        dffn_in += dp * lp.w1.transpose();

        Mat dz1 = layer_norm_backward(lt.ln1, lp.ln1_gain, dffn_in, lg.ln1_gain, lg.ln1_bias);
        Mat dx = dz1;
        Mat dout = dz1;
        if (drop) dout = dout.cwiseProduct(lt.out_mask);
        lg.attn.wo += lt.context.transpose() * dout;
        lg.attn.bo += dout.colwise().sum().transpose();
        Mat dctx = dout * lp.attn.wo.transpose();

        Mat dq(kMaxSeqLen, c.d_model), dk(kMaxSeqLen, c.d_model), dv(kMaxSeqLen, c.d_model);
        for (int hi = 0; hi < c.n_heads; ++hi) {
            const size_t h = static_cast<size_t>(hi);
            const auto dctx_h = dctx.middleCols(hi * dh_dim, dh_dim);
            const auto vh = lt.v.middleCols(hi * dh_dim, dh_dim);
            const Mat& a = lt.attn[h];
            Mat a_dropped = a;
            if (drop) a_dropped = a_dropped.cwiseProduct(lt.attn_mask[h]);

            Mat da = dctx_h * vh.transpose();
            dv.middleCols(hi * dh_dim, dh_dim) = a_dropped.transpose() * dctx_h;
            if (drop) da = da.cwiseProduct(lt.attn_mask[h]);

            Mat ds(kMaxSeqLen, kMaxSeqLen);
            for (int r = 0; r < kMaxSeqLen; ++r) {
                const double dot = da.row(r).dot(a.row(r));
                ds.row(r) = (a.row(r).array() * (da.row(r).array() - dot)).matrix();
            }
            const auto qh = lt.q.middleCols(hi * dh_dim, dh_dim);
            const auto kh = lt.k.middleCols(hi * dh_dim, dh_dim);
            dq.middleCols(hi * dh_dim, dh_dim) = ds * kh * scale;
            dk.middleCols(hi * dh_dim, dh_dim) = ds.transpose() * qh * scale;
        }

        lg.attn.wq += lt.input.transpose() * dq;
        lg.attn.bq += dq.colwise().sum().transpose();
        lg.attn.wk += lt.input.transpose() * dk;
        lg.attn.bk += dk.colwise().sum().transpose();
        lg.attn.wv += lt.input.transpose() * dv;
        lg.attn.bv += dv.colwise().sum().transpose();
        dx += dq * lp.attn.wq.transpose() + dk * lp.attn.wk.transpose() +
              dv * lp.attn.wv.transpose();
        dh = dx;
    }

    Mat dln = dh;
    if (drop) dln = dln.cwiseProduct(trace.emb_mask);
    Mat dx0 = layer_norm_backward(trace.emb_ln, params_.emb_ln_gain, dln, grads.emb_ln_gain,
                                  grads.emb_ln_bias);
    for (int p = 0; p < kMaxSeqLen; ++p) {
        grads.tok_emb.row(trace.ids[static_cast<size_t>(p)]) += dx0.row(p);
        grads.pos_emb.row(p) += dx0.row(p);
    }
}

void TransformerEncoder::save_weights(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw DataError("cannot write weights file: " + file.string());
    out.write("ECOLW001", 8);
    for (const auto& [ptr, n] : param_blocks(params_)) {
        out.write(reinterpret_cast<const char*>(ptr), static_cast<std::streamsize>(n * sizeof(double)));
    }
}

void TransformerEncoder::load_weights(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw DataError("cannot open weights file: " + file.string());
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::string(magic, 8) != "ECOLW001") {
        throw DataError("bad weights file header: " + file.string());
    }
    for (auto& [ptr, n] : param_blocks(params_)) {
        in.read(reinterpret_cast<char*>(ptr), static_cast<std::streamsize>(n * sizeof(double)));
        if (static_cast<size_t>(in.gcount()) != n * sizeof(double)) {
            throw DataError("weights file truncated: " + file.string());
        }
    }
    char extra;
    if (in.read(&extra, 1)) throw DataError("weights file has trailing data: " + file.string());
}

uint64_t TransformerEncoder::weights_hash() const {
    uint64_t h = 1469598103934665603ULL;
    for (const auto& [ptr, n] : param_blocks(params_)) {
        h = fnv1a64(ptr, n * sizeof(double), h);
    }
    return h;
}

std::string combine_document_text(const std::string& title, const std::string& article) {
    if (title.empty()) return article;
    if (article.empty()) return title;
    return title + ". " + article;
}

Vec encode_document(const TransformerEncoder& encoder, const WordPieceTokenizer& tokenizer,
                    const std::string& title, const std::string& article) {
    const std::string text = normalize_text(combine_document_text(title, article));
    return encoder.encode(tokenizer.encode(text));
}

// --- Checkpoint I/O -------------------------------------------------------

namespace {

nlohmann::json config_to_json(const EncoderConfig& c) {
    return nlohmann::json{
        {"vocab_size", c.vocab_size}, {"d_model", c.d_model},   {"n_layers", c.n_layers},
        {"n_heads", c.n_heads},       {"d_ff", c.d_ff},         {"output_dim", c.output_dim},
        {"dropout", c.dropout},
    };
}

EncoderConfig config_from_json(const nlohmann::json& j) {
    EncoderConfig c;
    c.vocab_size = j.at("vocab_size").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.output_dim = j.at("output_dim").get<int>();
    c.dropout = j.at("dropout").get<double>();
    return c;
}

std::string checkpoint_revision(const TransformerEncoder& encoder,
                                const WordPieceTokenizer& tokenizer) {
    uint64_t h = encoder.weights_hash();
    for (const std::string& tok : tokenizer.vocab()) {
        h = fnv1a64(tok.data(), tok.size(), h);
        h = fnv1a64("\n", 1, h);
    }
    h = fnv1a64(config_to_json(encoder.config()).dump(), h);
    return hash_hex(h);
}

} // namespace

void save_checkpoint(const std::filesystem::path& dir, const std::string& name,
                     const TransformerEncoder& encoder, const WordPieceTokenizer& tokenizer) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "config.json");
        if (!out) throw DataError("cannot write " + (dir / "config.json").string());
        out << config_to_json(encoder.config()).dump(2) << '\n';
    }
    tokenizer.save_vocab(dir / "vocab.txt");
    encoder.save_weights(dir / "weights.bin");
    {
        nlohmann::json lock{{"name", name}, {"revision", checkpoint_revision(encoder, tokenizer)}};
        std::ofstream out(dir / "lock.json");
        if (!out) throw DataError("cannot write " + (dir / "lock.json").string());
        out << lock.dump(2) << '\n';
    }
}

LoadedEncoder load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream cfg_in(dir / "config.json");
    if (!cfg_in) throw DataError("cannot open checkpoint config: " + (dir / "config.json").string());
    nlohmann::json cfg_json = nlohmann::json::parse(cfg_in);
    const EncoderConfig config = config_from_json(cfg_json);

    WordPieceTokenizer tokenizer = WordPieceTokenizer::from_vocab_file(dir / "vocab.txt");
    if (tokenizer.vocab_size() != config.vocab_size) {
        throw DataError("checkpoint vocabulary size does not match config");
    }
    TransformerEncoder encoder(config);
    encoder.load_weights(dir / "weights.bin");

    std::ifstream lock_in(dir / "lock.json");
    if (!lock_in) throw DataError("cannot open checkpoint lockfile: " + (dir / "lock.json").string());
    nlohmann::json lock_json = nlohmann::json::parse(lock_in);
    EncoderLock lock{lock_json.at("name").get<std::string>(),
                     lock_json.at("revision").get<std::string>()};

    const std::string actual = checkpoint_revision(encoder, tokenizer);
    if (actual != lock.revision) {
        throw DataError("checkpoint revision mismatch: lockfile " + lock.revision +
                        ", computed " + actual);
    }
    return LoadedEncoder{std::move(tokenizer), std::move(encoder), std::move(lock)};
}

} // namespace ecol
