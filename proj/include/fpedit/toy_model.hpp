#ifndef FPEDIT_TOY_MODEL_HPP
#define FPEDIT_TOY_MODEL_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fpedit/backend.hpp"
#include "fpedit/editing.hpp"
#include "fpedit/linalg.hpp"
#include "fpedit/rng.hpp"

namespace fpedit {

// Desk-scale stand-in for the language model around the edited layer. The
// encoder turns text into a key through the backend's pooled embedding and a
// seeded random-feature lift, the layer maps keys to output vectors, and the
// decoder reads an answer string off the output by nearest anchor.
//
// The input space splits into three seeded orthogonal blocks:
//   bulk       - carries the synthetic old-knowledge mass, never touched by
//                encoder keys;
//   protected  - reachable by encoder keys AND spanned by old keys, so the
//                null-space projector removes it from edits;
//   free       - reachable by encoder keys, unused by old keys; edits live here.
// The output space splits into a benign block (where ordinary text lands) and
// an anchor block reserved for registered answer vectors, which keeps decoded
// answers for non-fingerprint inputs away from every anchor.
struct ToyModelConfig {
    std::size_t d0 = 256;
    std::size_t d1 = 128;
    std::size_t embedding_dim = 64; // must match the backend
    std::size_t bulk_dim = 64;
    std::size_t protected_dim = 64;
    std::size_t benign_dim = 96;
    double rff_gamma = 32.0;  // random-feature bandwidth: higher = sharper key separation
    double key_scale = 12.0;  // every key has this Euclidean norm
    double bulk_gain = 80.0;  // layer gain on the bulk block
    double text_gain = 0.9;   // layer gain on encoder-reachable blocks
    double anchor_margin = 0.2;
    std::uint64_t seed = 1234;

    std::size_t free_dim() const { return d0 - bulk_dim - protected_dim; }
    std::size_t feature_dim() const { return protected_dim + free_dim(); }
    std::size_t anchor_dim() const { return d1 - benign_dim; }
};

class AnchorRegistry {
public:
    AnchorRegistry(Matrix anchor_basis /* d1 x anchor_dim */, double margin, std::uint64_t seed);

    static constexpr const char* unknown_answer = "unknown";

    // Registers (or returns) the unit anchor vector for an answer string.
    // Anchors are pairwise non-collinear by construction.
    const std::vector<double>& ensure(const std::string& answer);
    // Lookup of an already-registered anchor; throws InputError when missing.
    const std::vector<double>& get(const std::string& answer) const;
    bool has(const std::string& answer) const;

    // Nearest anchor by cosine; below the margin (or zero input) -> "unknown".
    std::string decode(std::span<const double> output) const;

    std::size_t size() const { return order_.size(); }

private:
    std::vector<double> derive(const std::string& answer, std::uint64_t salt) const;

    Matrix basis_;
    double margin_;
    std::uint64_t seed_;
    std::vector<std::string> order_;
    std::unordered_map<std::string, std::vector<double>> anchors_;
};

class ToyModel {
public:
    ToyModel(const ToyModelConfig& config, std::shared_ptr<const Scorer> backend);

    const ToyModelConfig& config() const { return cfg_; }
    const MemoryLayer& layer() const { return layer_; }
    const Scorer& backend() const { return *backend_; }

    AnchorRegistry& registry() { return registry_; }
    const AnchorRegistry& registry() const { return registry_; }

    // Deterministic text -> key map (norm = key_scale).
    std::vector<double> key_for(const std::string& text) const;

    std::string decode_output(std::span<const double> output) const;

    // Decoded answer for raw text under the current layer.
    std::string answer_for(const std::string& text) const;

    // Copy of this model with a replaced layer (post-edit view); encoder and
    // registry are shared state.
    ToyModel with_layer(MemoryLayer layer) const;
    void set_layer(MemoryLayer layer);

    // Synthetic old-knowledge keys: unit-scaled samples over bulk + protected.
    Matrix sample_old_keys(std::size_t count, std::uint64_t seed) const;

    // Basis columns [begin, end) of the seeded input basis; test hook.
    Matrix input_block(std::size_t begin, std::size_t end) const;

private:
    ToyModelConfig cfg_;
    std::shared_ptr<const Scorer> backend_;
    Matrix input_basis_;  // d0 x d0 orthonormal
    Matrix output_basis_; // d1 x d1 orthonormal
    Matrix rff_w_;        // feature_dim x embedding_dim
    std::vector<double> rff_b_;
    MemoryLayer layer_;
    AnchorRegistry registry_;
};

// Seeded orthonormal basis via modified Gram-Schmidt on Gaussian draws.
Matrix random_orthonormal(std::size_t n, Rng& rng);

} // namespace fpedit

#endif
