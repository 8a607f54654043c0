#ifndef FPEDIT_RUN_HPP
#define FPEDIT_RUN_HPP

#include <string>

#include "fpedit/artifacts.hpp"
#include "fpedit/config.hpp"
#include "fpedit/pipeline.hpp"

namespace fpedit {

// End-to-end pipeline outcome plus everything the report/manifest stages need.
struct PipelineOutcome {
    VerificationReport report;
    double change_rate = 0.0;
    double residual_new = 0.0;
    double residual_old = 0.0;
    std::size_t null_space_dim = 0;
    bool locality_ok = false;    // clean decodes identical pre/post edit
    bool change_rate_ok = false; // change_rate < 0.03
    bool contract_ok = false;    // fsr >= floor && fp <= ceiling
    RunManifest manifest;
};

// gen-prefixes stage in isolation: scores candidates, runs greedy selection,
// writes the SelectedPrefixSet JSON.
SelectedPrefixSet run_gen_prefixes(const RunConfig& config, const std::string& out_path);

// Full pipeline: gen-prefixes -> select -> encode -> edit -> verify. Writes
// prefixes.json, fingerprints.jsonl, base_model.fped, edited_model.fped,
// report.json and manifest.json under out_dir.
PipelineOutcome run_pipeline(const RunConfig& config);

std::string report_to_json(const PipelineOutcome& outcome);

} // namespace fpedit

#endif
