#ifndef FPEDIT_ROBUSTNESS_HPP
#define FPEDIT_ROBUSTNESS_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fpedit/pipeline.hpp"

namespace fpedit {

// Simulated incremental fine-tuning: gradient descent on a rank-r additive
// update A B^T fitted to the attacker's downstream key/value pairs.
struct AttackConfig {
    std::size_t rank = 8;
    std::size_t steps = 500;
    double step_size = 1e-3;
    KnowledgeBank downstream;
    std::uint64_t seed = 7;
    bool backtracking = true; // halve step_size whenever the loss would increase
};

struct AttackTrace {
    std::vector<double> losses; // downstream loss after each step (losses[0] = initial)
    std::vector<double> fsrs;   // fingerprint FSR after each step (fsrs[0] = pre-attack)
    double final_change = 0.0;  // ||A B^T||_F at the end
    bool diverged = false;
};

AttackTrace simulate_finetune(const ToyModel& model, const AttackConfig& attack,
                              const std::vector<FingerprintRecord>& records);

// Synthetic downstream bank: `repair_fraction` of the pairs replay current
// model behavior on fresh text-like keys and old-subspace keys, the rest teach
// new random targets.
KnowledgeBank make_downstream_bank(const ToyModel& model, std::size_t size, std::uint64_t seed,
                                   double repair_fraction = 0.5);

struct PplDefenseReport {
    std::vector<double> prefixed_ppl;
    std::vector<double> plain_ppl;
    std::vector<double> control_ppl; // prompts wearing a random non-selected prefix
    double median_prefixed = 0.0;
    double median_plain = 0.0;
    double median_control = 0.0;
};

// PPL of each (prefixed, plain) prompt pair plus control prompts.
PplDefenseReport ppl_defense(const Scorer& backend,
                             const std::vector<std::pair<std::string, std::string>>& prompts,
                             const std::vector<std::string>& control_prompts);

// True iff some token value occupies >= min_run consecutive positions.
bool detect_repeated_tokens(const std::vector<std::string>& output, std::size_t min_run);

// Fraction of held-out prefixed instructions that decode to a fingerprint
// target. Held-out instructions must be disjoint from the edited set.
double similar_input_probe(const ToyModel& model, const Scorer& backend,
                           const SelectedPrefixSet& prefixes, const SelectionConfig& config,
                           const std::vector<FingerprintRecord>& records,
                           const std::vector<std::string>& held_out);

double median(std::vector<double> values);

} // namespace fpedit

#endif
