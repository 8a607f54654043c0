#ifndef FPEDIT_PREFIX_HPP
#define FPEDIT_PREFIX_HPP

#include <span>
#include <string>
#include <vector>

#include "fpedit/backend.hpp"

namespace fpedit {

struct PrefixCandidate {
    std::size_t id = 0; // input-file order; also the tie-breaking rank
    std::string text;
    std::vector<std::string> tokens;
    double entropy = 0.0;                    // nats, teacher-forced sum over steps
    TokenDistribution last_token_distribution; // next-token distribution after the
                                               // full prefix, epsilon-clipped
};

struct ConstructionConfig {
    double alpha = 0.3;
    double beta = 0.5;
    std::size_t n_select = 1;
    double epsilon_clip = 1e-8;
};

struct SelectedPrefixSet {
    std::vector<PrefixCandidate> prefixes; // in selection order
    std::vector<double> objective_trace;   // per-step selection score; entry 0 is
                                           // the winning entropy, later entries are
                                           // alpha*sum KL(selected||e) + beta*H(e)
};

// Sum over teacher-forced steps of the per-step Shannon entropy.
double sequence_entropy(const Scorer& backend, std::span<const std::string> prefix);

// KL(p || q) after clipping both to max(., epsilon). Not renormalized after
// clipping, so exact-zero entries contribute at the epsilon floor.
double kl_divergence(const TokenDistribution& p, const TokenDistribution& q, double epsilon);

// alpha * sum over ordered pairs of KL + beta * sum of entropies.
double objective_value(std::span<const PrefixCandidate> set, const ConstructionConfig& config);

// Scores raw candidate texts with the backend (parallel over candidates).
std::vector<PrefixCandidate> score_candidates(const Scorer& backend,
                                              const std::vector<std::string>& texts,
                                              const ConstructionConfig& config);

// Three-stage greedy selection: minimum-entropy start, then per-step argmin of
// alpha * sum_{s in S} KL(d_s || d_e) + beta * H(e). Ties go to the lowest id.
SelectedPrefixSet greedy_select(const std::vector<PrefixCandidate>& candidates,
                                const ConstructionConfig& config);

} // namespace fpedit

#endif
