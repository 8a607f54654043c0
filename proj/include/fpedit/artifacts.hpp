#ifndef FPEDIT_ARTIFACTS_HPP
#define FPEDIT_ARTIFACTS_HPP

#include <map>
#include <string>
#include <vector>

#include "fpedit/prefix.hpp"

namespace fpedit {

// Candidate prefixes: UTF-8 text with one prefix per line, or a JSON array of
// strings (detected by a leading '[').
std::vector<std::string> load_candidate_texts(const std::string& path);

// Plain line-per-entry text file; blank lines are dropped.
std::vector<std::string> load_lines(const std::string& path);

// SelectedPrefixSet as JSON: selection parameters, ordered prefixes with their
// entropies, and the per-step objective trace. Token distributions are not
// persisted; downstream selection recomputes everything it needs from text.
void save_prefix_set(const std::string& path, const SelectedPrefixSet& set,
                     const ConstructionConfig& config);
SelectedPrefixSet load_prefix_set(const std::string& path);

// Reproducibility manifest: enough to reconstruct the run and detect any
// input/output drift. `timings_ms` is informational and excluded from
// identity comparisons.
struct RunManifest {
    std::string tool_version;
    std::string config_json;                       // RunConfig snapshot
    std::map<std::string, std::string> input_hashes;  // path -> fnv1a64 hex
    std::map<std::string, std::string> output_hashes; // path -> fnv1a64 hex
    std::vector<std::pair<std::string, double>> timings_ms;
};

void write_manifest(const std::string& path, const RunManifest& manifest);

} // namespace fpedit

#endif
