#ifndef FPEDIT_SELECTION_HPP
#define FPEDIT_SELECTION_HPP

#include <string>
#include <vector>

#include "fpedit/backend.hpp"
#include "fpedit/prefix.hpp"

namespace fpedit {

struct SelectionConfig {
    double lambda = 0.2; // 0 = semantics only, 1 = fluency only
};

struct PrefixScore {
    std::size_t prefix_id = 0;
    double cosine = 0.0;
    double ppl = 0.0;
    double combined = 0.0; // (1-lambda)*cosine + lambda/ppl
};

struct SelectionResult {
    PrefixCandidate chosen_prefix;
    double score = 0.0;
    std::vector<PrefixScore> per_prefix_scores; // one entry per prefix, input order
};

double cosine_similarity(const Embedding& a, const Embedding& b);

// Concatenation rule for e (+) p: prefix text, single space, instruction text.
std::string concat_prefix(const std::string& prefix, const std::string& instruction);

// Picks argmax of (1-lambda)*cos(pool(e+p), pool(p)) + lambda/PPL(e+p).
// Ties go to the lowest prefix index.
SelectionResult select_prefix(const Scorer& backend, const SelectedPrefixSet& prefixes,
                              const std::string& instruction, const SelectionConfig& config);

} // namespace fpedit

#endif
