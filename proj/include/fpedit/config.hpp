#ifndef FPEDIT_CONFIG_HPP
#define FPEDIT_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fpedit/toy_model.hpp"

namespace fpedit {

inline constexpr const char* kToolVersion = "0.1.0";

// Minimal TOML subset: [section] headers, key = value lines, # comments.
// Values: basic strings, integers, floats, booleans, flat arrays of those.
struct TomlValue {
    std::variant<bool, double, std::string, std::vector<TomlValue>> v;

    bool is_bool() const { return std::holds_alternative<bool>(v); }
    bool is_number() const { return std::holds_alternative<double>(v); }
    bool is_string() const { return std::holds_alternative<std::string>(v); }
};

// Keys are "section.key" (or bare "key" before any section header).
using TomlTable = std::map<std::string, TomlValue>;

TomlTable parse_toml(const std::string& text);
TomlTable load_toml_file(const std::string& path);

struct BackendSpec {
    std::string kind = "ngram"; // "ngram" | "remote"
    std::string corpus;         // ngram
    int order = 2;
    double smoothing = 0.01;
    bool with_unk = true;
    std::size_t embedding_dim = 64;
    std::string endpoint;         // remote
    std::size_t vocab_size = 256; // remote: expected distribution length
};

struct RunConfig {
    std::uint64_t seed = 42;
    std::string out_dir = "out";

    BackendSpec backend;

    // prefix construction
    std::string candidates_path;
    std::size_t n_prefixes = 10;
    double alpha = 0.3;
    double beta = 0.5;
    double epsilon_clip = 1e-8;

    // dynamic selection
    double lambda = 0.2;

    ToyModelConfig model;

    // editing
    double eigen_threshold = 1e-6;
    double c0_scale = 1.0;
    std::size_t old_key_count = 1000;

    // pipeline
    std::string instructions_path;
    std::string held_out_path;
    std::string target = "Virendale";
    double fsr_floor = 1.0;
    double fp_ceiling = 0.0;
};

// Parses the TOML file and applies the FPEDIT_BACKEND environment override
// ("ngram:<corpus>" or "remote:<endpoint>") when set.
RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_toml(const TomlTable& table);
void apply_backend_env_override(RunConfig& config, const char* value);

std::shared_ptr<Scorer> make_backend(const BackendSpec& spec);

} // namespace fpedit

#endif
