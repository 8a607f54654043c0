#include "fpedit/backend.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fpedit/hash.hpp"
#include "fpedit/rng.hpp"
#include "fpedit/tokenize.hpp"

namespace fpedit {

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& toks) {
    Vocabulary v;
    std::set<std::string> uniq(toks.begin(), toks.end());
    v.tokens.assign(uniq.begin(), uniq.end());
    if (v.tokens.size() < 2) throw ConfigError("vocabulary needs at least 2 distinct tokens");
    for (std::size_t i = 0; i < v.tokens.size(); ++i) v.index.emplace(v.tokens[i], i);
    return v;
}

std::size_t Vocabulary::lookup(std::string_view t) const {
    auto it = index.find(std::string(t));
    return it == index.end() ? npos : it->second;
}

double TokenDistribution::entropy() const {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

void validate_distribution(const TokenDistribution& d, double tol) {
    double sum = 0.0;
    for (double p : d.probs) {
        if (!(p >= 0.0)) throw NumericError("token distribution has a negative or NaN entry");
        sum += p;
    }
    if (std::fabs(sum - 1.0) > tol)
        throw NumericError("token distribution sums to " + std::to_string(sum) + ", expected 1");
}

double Embedding::norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

std::vector<double> hashed_token_feature(std::string_view token, std::size_t dim) {
    // Seed the stream from the token text only; construction stays seed-free.
    Rng rng(fnv1a64(token) ^ 0x5eedf00dULL);
    std::vector<double> f(dim);
    const double inv = 1.0 / std::sqrt(static_cast<double>(dim));
    for (std::size_t i = 0; i < dim; ++i) f[i] = rng.normal() * inv;
    return f;
}

std::vector<TokenDistribution> Scorer::step_distributions(std::span<const std::string> sequence) const {
    if (sequence.empty()) throw InputError("step_distributions: empty sequence");
    std::vector<TokenDistribution> out;
    out.reserve(sequence.size());
    for (std::size_t t = 0; t < sequence.size(); ++t)
        out.push_back(next_token_distribution(sequence.subspan(0, t)));
    return out;
}

double Scorer::sequence_nll(std::span<const std::string> sequence) const {
    if (sequence.empty()) throw InputError("sequence_nll: empty sequence");
    double total = 0.0;
    for (std::size_t t = 0; t < sequence.size(); ++t) {
        const TokenDistribution d = next_token_distribution(sequence.subspan(0, t));
        const std::size_t idx = vocab().lookup(sequence[t]);
        const double p = idx == Vocabulary::npos ? 0.0 : d.probs[idx];
        if (p <= 0.0)
            throw NumericError("sequence_nll: zero-probability token '" + sequence[t] +
                               "' at step " + std::to_string(t));
        total -= std::log(p);
    }
    return total / static_cast<double>(sequence.size());
}

double perplexity(const Scorer& backend, std::span<const std::string> sequence) {
    if (sequence.empty()) throw InputError("perplexity: sequence must have length >= 1");
    return std::exp(backend.sequence_nll(sequence));
}

// ---------------------------------------------------------------------------
// NgramBackend

NgramBackend::NgramBackend(std::string_view corpus, const NgramOptions& opts)
    : NgramBackend(tokenize(corpus), opts) {}

NgramBackend::NgramBackend(const std::vector<std::string>& corpus_tokens, const NgramOptions& opts)
    : opts_(opts) {
    if (corpus_tokens.empty()) throw ConfigError("ngram corpus is empty");
    if (opts.order < 1 || opts.order > 4)
        throw ConfigError("ngram order must be in [1, 4], got " + std::to_string(opts.order));
    if (opts.smoothing < 0.0) throw ConfigError("ngram smoothing must be >= 0");

    std::vector<std::string> vocab_tokens = corpus_tokens;
    if (opts.with_unk) vocab_tokens.emplace_back(unk_token);
    vocab_ = Vocabulary::from_tokens(vocab_tokens);

    counts_.resize(static_cast<std::size_t>(opts.order));
    const std::size_t n = corpus_tokens.size();
    for (std::size_t len = 0; len < counts_.size(); ++len) {
        auto& table = counts_[len];
        for (std::size_t i = len; i < n; ++i) {
            std::string key;
            for (std::size_t j = i - len; j < i; ++j) {
                key += corpus_tokens[j];
                key.push_back('\x1f');
            }
            auto& cc = table[key];
            cc.total += 1;
            cc.next[corpus_tokens[i]] += 1;
        }
    }
}

std::string NgramBackend::map_token(const std::string& t) const {
    if (vocab_.lookup(t) != Vocabulary::npos) return t;
    return opts_.with_unk ? std::string(unk_token) : t;
}

std::string NgramBackend::context_key(std::span<const std::string> context) const {
    const std::size_t len = std::min<std::size_t>(context.size(), static_cast<std::size_t>(opts_.order - 1));
    std::string key;
    for (std::size_t i = context.size() - len; i < context.size(); ++i) {
        key += map_token(context[i]);
        key.push_back('\x1f');
    }
    return key;
}

TokenDistribution NgramBackend::next_token_distribution(std::span<const std::string> context) const {
    const std::size_t len = std::min<std::size_t>(context.size(), static_cast<std::size_t>(opts_.order - 1));
    const auto& table = counts_[len];
    const auto it = table.find(context_key(context));

    const double k = opts_.smoothing;
    const double vsize = static_cast<double>(vocab_.size());
    const double total = it == table.end() ? 0.0 : static_cast<double>(it->second.total);
    if (total == 0.0 && k == 0.0)
        throw NumericError("ngram: unseen context with zero smoothing");

    TokenDistribution d;
    d.probs.assign(vocab_.size(), k / (total + k * vsize));
    if (it != table.end()) {
        const double denom = total + k * vsize;
        for (const auto& [tok, cnt] : it->second.next)
            d.probs[vocab_.lookup(tok)] = (static_cast<double>(cnt) + k) / denom;
    }
    return d;
}

double NgramBackend::token_probability(std::span<const std::string> context, const std::string& next) const {
    const std::size_t len = std::min<std::size_t>(context.size(), static_cast<std::size_t>(opts_.order - 1));
    const auto& table = counts_[len];
    const auto it = table.find(context_key(context));
    const double k = opts_.smoothing;
    const double vsize = static_cast<double>(vocab_.size());
    const double total = it == table.end() ? 0.0 : static_cast<double>(it->second.total);

    const std::string tok = map_token(next);
    if (vocab_.lookup(tok) == Vocabulary::npos) return 0.0;
    double cnt = 0.0;
    if (it != table.end()) {
        const auto nit = it->second.next.find(tok);
        if (nit != it->second.next.end()) cnt = static_cast<double>(nit->second);
    }
    const double denom = total + k * vsize;
    if (denom == 0.0) return 0.0;
    return (cnt + k) / denom;
}

double NgramBackend::sequence_nll(std::span<const std::string> sequence) const {
    if (sequence.empty()) throw InputError("sequence_nll: empty sequence");
    double total = 0.0;
    for (std::size_t t = 0; t < sequence.size(); ++t) {
        const double p = token_probability(sequence.subspan(0, t), sequence[t]);
        if (p <= 0.0)
            throw NumericError("sequence_nll: zero-probability token '" + sequence[t] +
                               "' at step " + std::to_string(t));
        total -= std::log(p);
    }
    return total / static_cast<double>(sequence.size());
}

Embedding NgramBackend::mean_pooled_embedding(std::string_view text) const {
    const std::vector<std::string> toks = tokenize(text);
    if (toks.empty()) throw InputError("mean_pooled_embedding: text tokenizes to nothing");
    Embedding e;
    e.values.assign(opts_.embedding_dim, 0.0);
    for (const auto& t : toks) {
        const std::vector<double> f = hashed_token_feature(t, opts_.embedding_dim);
        for (std::size_t i = 0; i < f.size(); ++i) e.values[i] += f[i];
    }
    const double inv = 1.0 / static_cast<double>(toks.size());
    for (double& v : e.values) v *= inv;
    return e;
}

// ---------------------------------------------------------------------------
// TableBackend

TableBackend::TableBackend(Vocabulary vocab, std::size_t embedding_dim)
    : vocab_(std::move(vocab)), embedding_dim_(embedding_dim) {}

void TableBackend::set_default_distribution(TokenDistribution d) {
    validate_distribution(d);
    default_dist_ = std::move(d);
    has_default_ = true;
}

void TableBackend::set_context_distribution(const std::vector<std::string>& context, TokenDistribution d) {
    validate_distribution(d);
    by_context_[join_tokens(context)] = std::move(d);
}

void TableBackend::set_token_feature(const std::string& token, std::vector<double> feature) {
    if (feature.size() != embedding_dim_) throw InputError("token feature has wrong dimension");
    token_features_[token] = std::move(feature);
}

void TableBackend::set_text_embedding(const std::string& text, std::vector<double> values) {
    if (values.size() != embedding_dim_) throw InputError("text embedding has wrong dimension");
    text_embeddings_[text] = std::move(values);
}

void TableBackend::set_text_nll(const std::string& text, double nll) { text_nll_[text] = nll; }

TokenDistribution TableBackend::next_token_distribution(std::span<const std::string> context) const {
    const auto it = by_context_.find(join_tokens({context.begin(), context.end()}));
    if (it != by_context_.end()) return it->second;
    if (has_default_) return default_dist_;
    TokenDistribution d;
    d.probs.assign(vocab_.size(), 1.0 / static_cast<double>(vocab_.size()));
    return d;
}

double TableBackend::sequence_nll(std::span<const std::string> sequence) const {
    const auto it = text_nll_.find(join_tokens({sequence.begin(), sequence.end()}));
    if (it != text_nll_.end()) return it->second;
    return Scorer::sequence_nll(sequence);
}

Embedding TableBackend::mean_pooled_embedding(std::string_view text) const {
    const auto it = text_embeddings_.find(std::string(text));
    if (it != text_embeddings_.end()) return Embedding{it->second};

    const std::vector<std::string> toks = tokenize(text);
    if (toks.empty()) throw InputError("mean_pooled_embedding: text tokenizes to nothing");
    Embedding e;
    e.values.assign(embedding_dim_, 0.0);
    for (const auto& t : toks) {
        const auto fit = token_features_.find(t);
        const std::vector<double> f =
            fit != token_features_.end() ? fit->second : hashed_token_feature(t, embedding_dim_);
        for (std::size_t i = 0; i < f.size(); ++i) e.values[i] += f[i];
    }
    const double inv = 1.0 / static_cast<double>(toks.size());
    for (double& v : e.values) v *= inv;
    return e;
}

} // namespace fpedit
