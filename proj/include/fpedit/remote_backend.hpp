#ifndef FPEDIT_REMOTE_BACKEND_HPP
#define FPEDIT_REMOTE_BACKEND_HPP

#include <string>

#include "fpedit/backend.hpp"

namespace fpedit {

// Adapter to a remote inference endpoint speaking the JSON scoring protocol:
// POST {"kind": "distribution"|"nll"|"embedding", "context": [...],
// "sequence": [...], "text": "..."} -> {"probs": [...]} | {"nll": x} |
// {"embedding": [...]}.
//
// Transport failures raise TransportError; contract violations raise
// SchemaError. Distributions off by at most 1e-3 in total mass are
// renormalized, anything worse is rejected.
class RemoteBackend final : public Scorer {
public:
    // `endpoint` is host:port or http://host:port; `path` is the POST target.
    RemoteBackend(std::string endpoint, Vocabulary vocab, std::size_t embedding_dim,
                  std::string path = "/score", int timeout_seconds = 10);

    const Vocabulary& vocab() const override { return vocab_; }
    std::size_t embedding_dim() const override { return embedding_dim_; }
    TokenDistribution next_token_distribution(std::span<const std::string> context) const override;
    double sequence_nll(std::span<const std::string> sequence) const override;
    Embedding mean_pooled_embedding(std::string_view text) const override;

private:
    std::string post(const std::string& body) const;

    std::string endpoint_;
    std::string path_;
    int timeout_seconds_;
    Vocabulary vocab_;
    std::size_t embedding_dim_;
};

} // namespace fpedit

#endif
