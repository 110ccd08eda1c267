#pragma once

#include "ecol/rng.hpp"
#include "ecol/sentence_encoder.hpp"
#include "ecol/tokenizer.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ecol {

using Mat = Eigen::MatrixXd;

// Content vectors are the final hidden state of the classification token.
constexpr int kContentDim = 768;

struct EncoderConfig {
    int vocab_size = 0;
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int d_ff = 256;
    int output_dim = kContentDim; // projection applied when d_model differs
    double dropout = 0.1;

    bool has_projection() const { return d_model != output_dim; }
    int head_dim() const { return d_model / n_heads; }
};

struct AttentionParams {
    Mat wq, wk, wv, wo; // d_model x d_model
    Vec bq, bk, bv, bo;
};

struct LayerParams {
    AttentionParams attn;
    Vec ln1_gain, ln1_bias;
    Mat w1; // d_model x d_ff
    Vec b1;
    Mat w2; // d_ff x d_model
    Vec b2;
    Vec ln2_gain, ln2_bias;
};

struct EncoderParams {
    Mat tok_emb; // vocab_size x d_model
    Mat pos_emb; // kMaxSeqLen x d_model
    Vec emb_ln_gain, emb_ln_bias;
    std::vector<LayerParams> layers;
    Mat proj_w; // d_model x output_dim, empty without projection
    Vec proj_b;
};

// Flat (pointer, count) view over every parameter tensor in a fixed order.
// Shared by the optimizer, serialization and hashing.
std::vector<std::pair<double*, size_t>> param_blocks(EncoderParams& p);
std::vector<std::pair<const double*, size_t>> param_blocks(const EncoderParams& p);

struct LayerNormTrace {
    Mat xhat;
    Vec inv_std;
};

struct LayerTrace {
    Mat input;                  // residual stream entering the layer
    Mat q, k, v;                // post-bias projections
    std::vector<Mat> attn;      // per-head softmax probabilities
    std::vector<Mat> attn_mask; // per-head dropout masks
    Mat context;                // concatenated (dropped attn) x V
    Mat out_mask;               // dropout mask after the output projection
    LayerNormTrace ln1;
    Mat ffn_in;                 // LN1 output
    Mat ffn_pre;                // pre-activation
    Mat ffn_act;                // activation output
    Mat ffn_mask;               // dropout mask on the FFN output
    LayerNormTrace ln2;
};

// Self-attention encoder over fixed 128-token windows. forward/backward use
// explicit activation traces; all dropout randomness comes from the caller's
// seeded Rng so training runs are reproducible.
class TransformerEncoder {
public:
    struct Trace {
        std::vector<int> ids;
        std::vector<int> mask;
        bool dropout_enabled = false;
        Mat emb_mask; // embedding dropout
        LayerNormTrace emb_ln;
        std::vector<LayerTrace> layers;
        Mat final_hidden; // kMaxSeqLen x d_model
    };

    TransformerEncoder(EncoderConfig config, uint64_t init_seed);
    explicit TransformerEncoder(EncoderConfig config); // zero weights, for loading

    const EncoderConfig& config() const { return config_; }

    // Inference path: deterministic, no dropout.
    Vec encode(const TokenSequence& seq) const;

    // Training path; pass dropout_rng = nullptr to disable dropout.
    Vec forward(const TokenSequence& seq, Trace& trace, Rng* dropout_rng) const;

    // Accumulates d(loss)/d(params) into `grads` given the gradient at the
    // classification-token output.
    void backward(const Trace& trace, const Vec& grad_out, EncoderParams& grads) const;

    EncoderParams& params() { return params_; }
    const EncoderParams& params() const { return params_; }
    EncoderParams zero_grads() const;

    void save_weights(const std::filesystem::path& file) const;
    void load_weights(const std::filesystem::path& file);
    uint64_t weights_hash() const;

private:
    EncoderConfig config_;
    EncoderParams params_;
};

// Encodes "title. article" (empty parts elided) with the shared encoder.
std::string combine_document_text(const std::string& title, const std::string& article);
Vec encode_document(const TransformerEncoder& encoder, const WordPieceTokenizer& tokenizer,
                    const std::string& title, const std::string& article);

// --- Checkpoint directory: weights + vocabulary + lockfile ---------------

struct EncoderLock {
    std::string name;
    std::string revision;
};

struct LoadedEncoder {
    WordPieceTokenizer tokenizer;
    TransformerEncoder encoder;
    EncoderLock lock;

    Vec encode_text(const std::string& normalized_text) const {
        return encoder.encode(tokenizer.encode(normalized_text));
    }
};

void save_checkpoint(const std::filesystem::path& dir, const std::string& name,
                     const TransformerEncoder& encoder, const WordPieceTokenizer& tokenizer);
LoadedEncoder load_checkpoint(const std::filesystem::path& dir);

} // namespace ecol
