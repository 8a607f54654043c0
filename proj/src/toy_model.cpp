#include "fpedit/toy_model.hpp"

#include <algorithm>
#include <cmath>

#include "fpedit/hash.hpp"

namespace fpedit {

Matrix random_orthonormal(std::size_t n, Rng& rng) {
    Matrix q(n, n);
    for (double& v : q.data()) v = rng.normal();
    // Modified Gram-Schmidt over columns.
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t prev = 0; prev < j; ++prev) {
            double dot = 0.0;
            for (std::size_t i = 0; i < n; ++i) dot += q.at(i, prev) * q.at(i, j);
            for (std::size_t i = 0; i < n; ++i) q.at(i, j) -= dot * q.at(i, prev);
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += q.at(i, j) * q.at(i, j);
        norm = std::sqrt(norm);
        if (norm < 1e-12) throw NumericError("random_orthonormal: degenerate column");
        for (std::size_t i = 0; i < n; ++i) q.at(i, j) /= norm;
    }
    return q;
}

// ---------------------------------------------------------------------------
// AnchorRegistry

AnchorRegistry::AnchorRegistry(Matrix anchor_basis, double margin, std::uint64_t seed)
    : basis_(std::move(anchor_basis)), margin_(margin), seed_(seed) {}

std::vector<double> AnchorRegistry::derive(const std::string& answer, std::uint64_t salt) const {
    Rng rng(fnv1a64(answer) ^ seed_ ^ (salt * 0x9e3779b97f4a7c15ULL));
    std::vector<double> g(basis_.cols());
    for (double& v : g) v = rng.normal();
    std::vector<double> a(basis_.rows(), 0.0);
    for (std::size_t i = 0; i < basis_.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < basis_.cols(); ++j) s += basis_.at(i, j) * g[j];
        a[i] = s;
    }
    double norm = 0.0;
    for (double v : a) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw NumericError("anchor registry: degenerate anchor draw");
    for (double& v : a) v /= norm;
    return a;
}

const std::vector<double>& AnchorRegistry::ensure(const std::string& answer) {
    if (basis_.cols() < 2) throw ConfigError("anchor registry: anchor block needs >= 2 dimensions");
    if (answer == unknown_answer)
        throw InputError("'unknown' is the reserved no-answer string and cannot be an anchor");
    auto it = anchors_.find(answer);
    if (it != anchors_.end()) return it->second;

    std::vector<double> a;
    for (std::uint64_t salt = 0;; ++salt) {
        if (salt > 64) throw NumericError("anchor registry: could not find a non-collinear anchor");
        a = derive(answer, salt);
        bool ok = true;
        for (const auto& name : order_) {
            const auto& other = anchors_[name];
            double dot = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * other[i];
            if (std::fabs(dot) > 0.99) {
                ok = false;
                break;
            }
        }
        if (ok) break;
    }
    order_.push_back(answer);
    return anchors_.emplace(answer, std::move(a)).first->second;
}

const std::vector<double>& AnchorRegistry::get(const std::string& answer) const {
    auto it = anchors_.find(answer);
    if (it == anchors_.end()) throw InputError("anchor registry: no anchor for '" + answer + "'");
    return it->second;
}

bool AnchorRegistry::has(const std::string& answer) const { return anchors_.count(answer) > 0; }

std::string AnchorRegistry::decode(std::span<const double> output) const {
    if (order_.empty()) return unknown_answer;
    double norm = 0.0;
    for (double v : output) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) return unknown_answer;

    // Best anchor by cosine; earlier registration wins ties.
    std::string best;
    double best_cos = 0.0;
    bool first = true;
    for (const auto& name : order_) {
        const auto& a = anchors_.at(name);
        if (a.size() != output.size()) throw InputError("decode: output dimension mismatch");
        double dot = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * output[i];
        const double c = dot / norm;
        if (first || c > best_cos) {
            best_cos = c;
            best = name;
            first = false;
        }
    }
    return best_cos < margin_ ? std::string(unknown_answer) : best;
}

// ---------------------------------------------------------------------------
// ToyModel

namespace {

Matrix slice_columns(const Matrix& m, std::size_t begin, std::size_t end) {
    Matrix out(m.rows(), end - begin);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = begin; j < end; ++j) out.at(i, j - begin) = m.at(i, j);
    return out;
}

} // namespace

ToyModel::ToyModel(const ToyModelConfig& config, std::shared_ptr<const Scorer> backend)
    : cfg_(config),
      backend_(std::move(backend)),
      registry_(Matrix(), config.anchor_margin, config.seed) {
    if (!backend_) throw ConfigError("ToyModel: backend is required");
    if (backend_->embedding_dim() != cfg_.embedding_dim)
        throw ConfigError("ToyModel: backend embedding dim " +
                          std::to_string(backend_->embedding_dim()) + " != configured " +
                          std::to_string(cfg_.embedding_dim));
    if (cfg_.bulk_dim + cfg_.protected_dim >= cfg_.d0)
        throw ConfigError("ToyModel: bulk + protected blocks must leave free dimensions");
    if (cfg_.benign_dim >= cfg_.d1)
        throw ConfigError("ToyModel: benign block must leave anchor dimensions");
    if (cfg_.key_scale <= 0.0) throw ConfigError("ToyModel: key_scale must be positive");

    Rng rng(cfg_.seed);
    input_basis_ = random_orthonormal(cfg_.d0, rng);
    output_basis_ = random_orthonormal(cfg_.d1, rng);

    const std::size_t s = cfg_.feature_dim();
    rff_w_ = Matrix(s, cfg_.embedding_dim);
    for (double& v : rff_w_.data()) v = rng.normal();
    rff_b_.resize(s);
    for (double& v : rff_b_) v = rng.uniform(0.0, 6.283185307179586);

    // Layer = bulk_gain * D_bulk U_bulk^T + text_gain * D_text U_text^T.
    // Both output maps land inside the benign block, so nothing the untouched
    // layer produces has any anchor-block component.
    const Matrix benign = slice_columns(output_basis_, 0, cfg_.benign_dim);
    const Matrix u_bulk = slice_columns(input_basis_, 0, cfg_.bulk_dim);
    const Matrix u_text = slice_columns(input_basis_, cfg_.bulk_dim, cfg_.d0);

    const Matrix qb = random_orthonormal(cfg_.benign_dim, rng);
    const Matrix d_bulk = linalg::multiply(benign, slice_columns(qb, 0, cfg_.bulk_dim));

    Matrix g(cfg_.benign_dim, s);
    const double gscale = 1.0 / std::sqrt(static_cast<double>(cfg_.benign_dim));
    for (double& v : g.data()) v = rng.normal() * gscale;
    const Matrix d_text = linalg::multiply(benign, g);

    Matrix w = linalg::add(linalg::scale(linalg::multiply_abt(d_bulk, u_bulk), cfg_.bulk_gain),
                           linalg::scale(linalg::multiply_abt(d_text, u_text), cfg_.text_gain));
    layer_ = MemoryLayer{std::move(w)};

    registry_ = AnchorRegistry(slice_columns(output_basis_, cfg_.benign_dim, cfg_.d1),
                               cfg_.anchor_margin, cfg_.seed);
}

std::vector<double> ToyModel::key_for(const std::string& text) const {
    const Embedding emb = backend_->mean_pooled_embedding(text);
    const std::size_t s = cfg_.feature_dim();

    std::vector<double> z(s);
    for (std::size_t j = 0; j < s; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < cfg_.embedding_dim; ++i)
            dot += rff_w_.at(j, i) * emb.values[i];
        z[j] = std::cos(cfg_.rff_gamma * dot + rff_b_[j]);
    }
    double norm = 0.0;
    for (double v : z) norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-12) throw NumericError("key_for: degenerate random-feature vector");

    std::vector<double> key(cfg_.d0, 0.0);
    const double scale = cfg_.key_scale / norm;
    for (std::size_t i = 0; i < cfg_.d0; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < s; ++j)
            sum += input_basis_.at(i, cfg_.bulk_dim + j) * z[j];
        key[i] = scale * sum;
    }
    return key;
}

std::string ToyModel::decode_output(std::span<const double> output) const {
    return registry_.decode(output);
}

std::string ToyModel::answer_for(const std::string& text) const {
    const std::vector<double> key = key_for(text);
    const std::vector<double> out = linalg::multiply_vec(layer_.W, key);
    return registry_.decode(out);
}

ToyModel ToyModel::with_layer(MemoryLayer layer) const {
    ToyModel copy = *this;
    copy.set_layer(std::move(layer));
    return copy;
}

void ToyModel::set_layer(MemoryLayer layer) {
    if (layer.W.rows() != cfg_.d1 || layer.W.cols() != cfg_.d0)
        throw InputError("set_layer: weight shape mismatch");
    layer_ = std::move(layer);
}

Matrix ToyModel::sample_old_keys(std::size_t count, std::uint64_t seed) const {
    if (count < 1) throw InputError("sample_old_keys: count must be >= 1");
    const std::size_t span = cfg_.bulk_dim + cfg_.protected_dim;
    Rng rng(seed);
    Matrix keys(cfg_.d0, count);
    std::vector<double> g(span);
    for (std::size_t c = 0; c < count; ++c) {
        double norm = 0.0;
        for (double& v : g) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        const double scale = cfg_.key_scale / norm;
        for (std::size_t i = 0; i < cfg_.d0; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < span; ++j) s += input_basis_.at(i, j) * g[j];
            keys.at(i, c) = scale * s;
        }
    }
    return keys;
}

Matrix ToyModel::input_block(std::size_t begin, std::size_t end) const {
    return slice_columns(input_basis_, begin, end);
}

} // namespace fpedit
