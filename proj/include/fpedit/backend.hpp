#ifndef FPEDIT_BACKEND_HPP
#define FPEDIT_BACKEND_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fpedit/errors.hpp"

namespace fpedit {

struct Vocabulary {
    std::vector<std::string> tokens; // sorted, unique
    std::unordered_map<std::string, std::size_t> index;

    static Vocabulary from_tokens(const std::vector<std::string>& toks);

    std::size_t size() const { return tokens.size(); }
    // npos when the token is unknown.
    std::size_t lookup(std::string_view t) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

// Probability vector over a vocabulary at one decoding step.
struct TokenDistribution {
    std::vector<double> probs;

    double entropy() const; // nats, 0*ln(0) = 0
};

// Throws NumericError unless entries are non-negative and sum to 1 +- tol.
void validate_distribution(const TokenDistribution& d, double tol = 1e-9);

struct Embedding {
    std::vector<double> values;

    double norm() const;
};

// Deterministic hashed feature vector for one token; the reference backends'
// substitute for model hidden states. Unit scale in expectation.
std::vector<double> hashed_token_feature(std::string_view token, std::size_t dim);

// Scoring contract. Implementations are immutable after construction, so
// concurrent read-only queries are safe.
class Scorer {
public:
    virtual ~Scorer() = default;

    virtual const Vocabulary& vocab() const = 0;
    virtual std::size_t embedding_dim() const = 0;

    // Distribution over the next token given `context` (may be empty).
    virtual TokenDistribution next_token_distribution(std::span<const std::string> context) const = 0;

    // Teacher-forced per-step distributions: entry t conditions on tokens < t.
    virtual std::vector<TokenDistribution> step_distributions(std::span<const std::string> sequence) const;

    // Mean per-token negative log-likelihood in nats.
    virtual double sequence_nll(std::span<const std::string> sequence) const;

    // Arithmetic mean of per-token feature vectors; padding never enters the
    // mean because the tokenizer emits none.
    virtual Embedding mean_pooled_embedding(std::string_view text) const = 0;
};

// PPL = exp(L). Throws NumericError on a zero-probability token rather than
// silently returning infinity.
double perplexity(const Scorer& backend, std::span<const std::string> sequence);

struct NgramOptions {
    int order = 2;          // in [1, 4]
    double smoothing = 0.01; // add-k; k = 0 keeps raw counts
    bool with_unk = false;  // reserve an <unk> token for out-of-vocabulary queries
    std::size_t embedding_dim = 64;
};

// Reference scoring backend: an add-k smoothed n-gram model with hashed token
// features for pooling. Construction is seed-free and bit-reproducible.
class NgramBackend final : public Scorer {
public:
    NgramBackend(std::string_view corpus, const NgramOptions& opts);
    NgramBackend(const std::vector<std::string>& corpus_tokens, const NgramOptions& opts);

    const Vocabulary& vocab() const override { return vocab_; }
    std::size_t embedding_dim() const override { return opts_.embedding_dim; }
    TokenDistribution next_token_distribution(std::span<const std::string> context) const override;
    double sequence_nll(std::span<const std::string> sequence) const override;
    Embedding mean_pooled_embedding(std::string_view text) const override;

    static constexpr const char* unk_token = "<unk>";

private:
    struct ContextCounts {
        long long total = 0;
        std::map<std::string, long long> next;
    };

    std::string map_token(const std::string& t) const;
    std::string context_key(std::span<const std::string> context) const;
    double token_probability(std::span<const std::string> context, const std::string& next) const;

    NgramOptions opts_;
    Vocabulary vocab_;
    // counts_[L]: contexts of exactly L tokens, L in [0, order-1]
    std::vector<std::unordered_map<std::string, ContextCounts>> counts_;
};

// Fixed-table stub used for exact-value tests: distributions, embeddings and
// NLLs can be pinned per context/text.
class TableBackend final : public Scorer {
public:
    TableBackend(Vocabulary vocab, std::size_t embedding_dim);

    void set_default_distribution(TokenDistribution d);
    void set_context_distribution(const std::vector<std::string>& context, TokenDistribution d);
    void set_token_feature(const std::string& token, std::vector<double> feature);
    void set_text_embedding(const std::string& text, std::vector<double> values);
    void set_text_nll(const std::string& text, double nll);

    const Vocabulary& vocab() const override { return vocab_; }
    std::size_t embedding_dim() const override { return embedding_dim_; }
    TokenDistribution next_token_distribution(std::span<const std::string> context) const override;
    double sequence_nll(std::span<const std::string> sequence) const override;
    Embedding mean_pooled_embedding(std::string_view text) const override;

private:
    Vocabulary vocab_;
    std::size_t embedding_dim_;
    TokenDistribution default_dist_;
    bool has_default_ = false;
    std::unordered_map<std::string, TokenDistribution> by_context_;
    std::unordered_map<std::string, std::vector<double>> token_features_;
    std::unordered_map<std::string, std::vector<double>> text_embeddings_;
    std::unordered_map<std::string, double> text_nll_;
};

} // namespace fpedit

#endif
