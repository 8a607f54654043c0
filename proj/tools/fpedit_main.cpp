// fpedit: fingerprint construction, editing, verification and stress CLI.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fpedit/artifacts.hpp"
#include "fpedit/config.hpp"
#include "fpedit/hash.hpp"
#include "fpedit/robustness.hpp"
#include "fpedit/run.hpp"
#include "fpedit/tokenize.hpp"
#include "fpedit/weights_io.hpp"

using namespace fpedit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };
LogLevel g_log_level = LogLevel::info;

void log_at(LogLevel level, const std::string& msg) {
    if (level < g_log_level) return;
    static const char* names[] = {"debug", "info", "warn", "error"};
    std::cerr << "[fpedit:" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("short write to '" + path + "'");
}

void emit(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_text(out_path, text);
        log_at(LogLevel::info, "wrote " + out_path);
    }
}

struct GlobalOptions {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string log_level = "info";
};

RunConfig effective_config(const GlobalOptions& g) {
    RunConfig c;
    if (!g.config_path.empty()) {
        c = load_run_config(g.config_path);
    } else {
        apply_backend_env_override(c, std::getenv("FPEDIT_BACKEND"));
    }
    if (g.seed_set) {
        c.seed = g.seed;
        c.model.seed = g.seed;
    }
    if (!g.out_dir.empty()) c.out_dir = g.out_dir;
    return c;
}

// Rebuilds the deterministic toy model for a config, replacing its layer with
// weights from disk and re-registering the record anchors.
ToyModel model_for_weights(const RunConfig& config, const std::string& weights_path,
                           const std::vector<FingerprintRecord>& records) {
    const auto backend = make_backend(config.backend);
    ToyModelConfig mc = config.model;
    mc.embedding_dim = backend->embedding_dim();
    mc.seed = config.seed;
    ToyModel model(mc, backend);
    for (const auto& r : records) model.registry().ensure(r.tuple.y_prime);
    model.set_layer(MemoryLayer{load_matrix(weights_path)});
    return model;
}

json attack_trace_json(const AttackConfig& cfg, std::size_t downstream_size, const AttackTrace& trace) {
    json j;
    j["rank"] = cfg.rank;
    j["steps"] = cfg.steps;
    j["step_size"] = cfg.step_size;
    j["downstream_size"] = downstream_size;
    j["seed"] = cfg.seed;
    j["losses"] = trace.losses;
    j["fsrs"] = trace.fsrs;
    j["final_change"] = trace.final_change;
    j["diverged"] = trace.diverged;
    return j;
}

int run_report(const std::vector<std::string>& inputs, const std::string& out_path) {
    json machine;
    machine["reports"] = json::array();
    std::ostringstream table;

    struct AttackRow {
        double budget;
        double final_fsr;
        double min_fsr;
        std::string path;
    };
    std::vector<AttackRow> attack_rows;

    for (const auto& path : inputs) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open report '" + path + "'");
        std::ostringstream ss;
        ss << in.rdbuf();
        const std::string text = ss.str();
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            std::size_t line = 1;
            for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i)
                if (text[i] == '\n') ++line;
            throw IoError("'" + path + "' line " + std::to_string(line) + ": " + e.what());
        }
        json entry;
        entry["path"] = path;
        entry["report"] = j;
        machine["reports"].push_back(entry);

        if (j.contains("fsrs")) {
            AttackRow row;
            row.budget = j.value("downstream_size", 0.0);
            const auto fsrs = j.at("fsrs").get<std::vector<double>>();
            row.final_fsr = fsrs.empty() ? 0.0 : fsrs.back();
            row.min_fsr = fsrs.empty() ? 0.0 : *std::min_element(fsrs.begin(), fsrs.end());
            row.path = path;
            attack_rows.push_back(row);
        } else if (j.contains("fsr")) {
            table << "verification " << path << "\n";
            table << "  fsr              " << j.at("fsr").get<double>() << "\n";
            table << "  false positives  " << j.value("false_positive_rate", 0.0) << "\n";
            if (j.contains("change_rate")) table << "  change rate      " << j["change_rate"].get<double>() << "\n";
            if (j.contains("defenses")) {
                const auto& d = j["defenses"];
                table << "  ppl median (prefixed/plain/control)  " << d.value("median_prefixed", 0.0)
                      << " / " << d.value("median_plain", 0.0) << " / " << d.value("median_control", 0.0)
                      << "\n";
            }
        } else {
            throw IoError("'" + path + "': not a recognized report (no fsr/fsrs field)");
        }
    }

    if (!attack_rows.empty()) {
        std::sort(attack_rows.begin(), attack_rows.end(),
                  [](const AttackRow& a, const AttackRow& b) { return a.budget < b.budget; });
        table << "attacks (by downstream budget)\n";
        table << "  budget  final_fsr  min_fsr  trace\n";
        for (const auto& r : attack_rows) {
            char buf[160];
            std::snprintf(buf, sizeof(buf), "  %6.0f  %9.4f  %7.4f  %s\n", r.budget, r.final_fsr,
                          r.min_fsr, r.path.c_str());
            table << buf;
        }
    }

    std::cout << table.str();
    if (!out_path.empty()) {
        write_text(out_path, machine.dump(2) + "\n");
        log_at(LogLevel::info, "wrote " + out_path);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PREE-style fingerprint editing pipeline"};
    app.require_subcommand(1);

    GlobalOptions g;
    app.add_option("--config", g.config_path, "TOML run configuration");
    app.add_option("--out-dir", g.out_dir, "output directory override");
    auto* seed_opt = app.add_option("--seed", g.seed, "seed override");
    app.add_option("--log-level", g.log_level, "debug|info|warn|error")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

    // gen-prefixes
    auto* gen = app.add_subcommand("gen-prefixes", "score candidates and select N prefixes");
    std::string gen_candidates, gen_out;
    std::size_t gen_n = 0;
    double gen_alpha = -1.0, gen_beta = -1.0, gen_epsilon = -1.0;
    gen->add_option("--candidates", gen_candidates, "candidate file (lines or JSON array)");
    gen->add_option("--n", gen_n, "number of prefixes to select");
    gen->add_option("--alpha", gen_alpha, "KL weight (default 0.3)");
    gen->add_option("--beta", gen_beta, "entropy weight (default 0.5)");
    gen->add_option("--epsilon", gen_epsilon, "probability clipping floor (default 1e-8)");
    gen->add_option("--out", gen_out, "output JSON path (default <out-dir>/prefixes.json)");

    // select-prefix
    auto* sel = app.add_subcommand("select-prefix", "pick the best prefix for one prompt");
    std::string sel_prefixes, sel_prompt, sel_out;
    double sel_lambda = -1.0;
    sel->add_option("--prefixes", sel_prefixes, "SelectedPrefixSet JSON")->required();
    sel->add_option("--prompt", sel_prompt, "instruction text")->required();
    sel->add_option("--lambda", sel_lambda, "fluency weight (default 0.2)");
    sel->add_option("--out", sel_out, "output JSON path (default stdout)");

    // edit
    auto* edit = app.add_subcommand("edit", "solve and apply the fingerprint perturbation");
    std::string edit_model, edit_fps, edit_old_keys, edit_out, edit_report;
    std::size_t edit_synthetic_old = 0;
    bool edit_unconstrained = false;
    double edit_eigen = -1.0, edit_c0_scale = -1.0;
    edit->add_option("--model", edit_model, "input weight file (FPED)")->required();
    edit->add_option("--fingerprints", edit_fps, "fingerprint JSONL")->required();
    edit->add_option("--old-keys", edit_old_keys, "old-knowledge key matrix (FPED, d0 x m)");
    edit->add_option("--synthetic-old", edit_synthetic_old,
                     "sample this many synthetic old keys instead of --old-keys");
    edit->add_flag("--unconstrained", edit_unconstrained,
                   "drop the old-knowledge term and projector (baseline edit)");
    edit->add_option("--eigen-threshold", edit_eigen, "relative null-space cutoff (default 1e-6)");
    edit->add_option("--c0-scale", edit_c0_scale, "C0 rescaling knob (default 1)");
    edit->add_option("--out", edit_out, "edited weight file")->required();
    edit->add_option("--report", edit_report, "edit summary JSON path");

    // verify
    auto* ver = app.add_subcommand("verify", "measure FSR / false positives on a weight file");
    std::string ver_model, ver_fps, ver_clean, ver_held, ver_out, ver_prefixes;
    bool ver_defenses = false;
    ver->add_option("--model", ver_model, "weight file (FPED)")->required();
    ver->add_option("--fingerprints", ver_fps, "fingerprint JSONL")->required();
    ver->add_option("--clean", ver_clean, "clean instruction file")->required();
    ver->add_option("--held-out", ver_held, "held-out instruction file (similar-input probe)");
    ver->add_option("--prefixes", ver_prefixes, "SelectedPrefixSet JSON (needed for --defenses/--held-out)");
    ver->add_flag("--defenses", ver_defenses, "add PPL-filter and similar-input defense probes");
    ver->add_option("--out", ver_out, "output JSON path (default stdout)");

    // attack
    auto* att = app.add_subcommand("attack", "simulated incremental fine-tuning attack");
    std::string att_model, att_fps, att_out;
    std::size_t att_rank = 8, att_steps = 500, att_down = 1000;
    double att_step_size = 2e-4, att_repair = 0.5;
    std::uint64_t att_seed = 7;
    att->add_option("--model", att_model, "weight file (FPED)")->required();
    att->add_option("--fingerprints", att_fps, "fingerprint JSONL")->required();
    att->add_option("--rank", att_rank, "low-rank update rank (default 8)");
    att->add_option("--steps", att_steps, "descent steps (default 500)");
    att->add_option("--step-size", att_step_size, "initial step size (default 2e-4)");
    att->add_option("--downstream-size", att_down, "downstream pair count (default 1000)");
    att->add_option("--repair-fraction", att_repair, "fraction of behavior-replay pairs (default 0.5)");
    att->add_option("--seed", att_seed, "attack seed (default 7)");
    att->add_option("--out", att_out, "output JSON path (default stdout)");

    // report
    auto* rep = app.add_subcommand("report", "summarize report/trace JSON files");
    std::vector<std::string> rep_inputs;
    std::string rep_out;
    rep->add_option("inputs", rep_inputs, "report/trace JSON files")->required();
    rep->add_option("--out", rep_out, "merged machine-readable JSON path");

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "run the full fingerprinting pipeline");

    CLI11_PARSE(app, argc, argv);

    g.seed_set = seed_opt->count() > 0;
    if (g.log_level == "debug") g_log_level = LogLevel::debug;
    else if (g.log_level == "warn") g_log_level = LogLevel::warn;
    else if (g.log_level == "error") g_log_level = LogLevel::error;

    try {
        RunConfig config = effective_config(g);

        if (gen->parsed()) {
            if (!gen_candidates.empty()) config.candidates_path = gen_candidates;
            if (gen_n > 0) config.n_prefixes = gen_n;
            if (gen_alpha >= 0.0) config.alpha = gen_alpha;
            if (gen_beta >= 0.0) config.beta = gen_beta;
            if (gen_epsilon > 0.0) config.epsilon_clip = gen_epsilon;
            std::string out = gen_out;
            if (out.empty()) {
                fs::create_directories(config.out_dir);
                out = (fs::path(config.out_dir) / "prefixes.json").string();
            }
            const SelectedPrefixSet set = run_gen_prefixes(config, out);
            log_at(LogLevel::info, "selected " + std::to_string(set.prefixes.size()) +
                                       " prefixes -> " + out);
            return 0;
        }

        if (sel->parsed()) {
            if (sel_lambda >= 0.0) config.lambda = sel_lambda;
            const auto backend = make_backend(config.backend);
            const SelectedPrefixSet set = load_prefix_set(sel_prefixes);
            SelectionConfig sc;
            sc.lambda = config.lambda;
            const SelectionResult result = select_prefix(*backend, set, sel_prompt, sc);
            json j;
            j["prompt"] = sel_prompt;
            j["lambda"] = sc.lambda;
            j["chosen_id"] = result.chosen_prefix.id;
            j["chosen_text"] = result.chosen_prefix.text;
            j["score"] = result.score;
            json scores = json::array();
            for (const auto& s : result.per_prefix_scores) {
                json e;
                e["prefix_id"] = s.prefix_id;
                e["cosine"] = s.cosine;
                e["ppl"] = s.ppl;
                e["combined"] = s.combined;
                scores.push_back(std::move(e));
            }
            j["per_prefix_scores"] = std::move(scores);
            emit(sel_out, j.dump(2) + "\n");
            return 0;
        }

        if (edit->parsed()) {
            if (edit_eigen > 0.0) config.eigen_threshold = edit_eigen;
            if (edit_c0_scale > 0.0) config.c0_scale = edit_c0_scale;
            const auto records = load_records(edit_fps);
            const MemoryLayer layer{load_matrix(edit_model)};

            Matrix old_keys;
            if (!edit_old_keys.empty()) {
                old_keys = load_matrix(edit_old_keys);
            } else if (edit_synthetic_old > 0) {
                ToyModel model = model_for_weights(config, edit_model, records);
                old_keys = model.sample_old_keys(edit_synthetic_old, config.seed ^ 0x01dc0deULL);
            } else {
                throw ConfigError("edit: provide --old-keys FILE or --synthetic-old N");
            }
            if (old_keys.rows() != layer.d0())
                throw InputError("edit: old keys have dimension " + std::to_string(old_keys.rows()) +
                                 ", layer expects " + std::to_string(layer.d0()));

            const OldKnowledgeStats stats = estimate_old_stats(old_keys);
            const Projector proj = compute_projector(stats, config.eigen_threshold);
            SolveOptions so;
            so.c0_scale = config.c0_scale;
            so.use_projector = !edit_unconstrained;
            const KnowledgeBank bank = bank_from_records(records);
            const EditSolution sol = solve_perturbation(layer, bank, stats, proj, so);
            save_matrix(edit_out, apply_edit(layer, sol).W);
            log_at(LogLevel::info, "wrote " + edit_out);

            json j;
            j["residual_new"] = sol.residual_new;
            j["residual_old"] = sol.residual_old;
            j["change_rate"] = sol.change_rate;
            j["change_rate_ok"] = sol.change_rate < 0.03;
            j["null_space_dim"] = proj.rank;
            j["unconstrained"] = edit_unconstrained;
            if (!edit_report.empty()) {
                write_text(edit_report, j.dump(2) + "\n");
                log_at(LogLevel::info, "wrote " + edit_report);
            } else {
                std::cout << j.dump(2) << "\n";
            }
            return 0;
        }

        if (ver->parsed()) {
            const auto records = load_records(ver_fps);
            ToyModel model = model_for_weights(config, ver_model, records);
            const auto clean = load_lines(ver_clean);

            SelectionConfig sc;
            sc.lambda = config.lambda;
            std::vector<std::string> probes;
            SelectedPrefixSet set;
            const bool have_prefixes = !ver_prefixes.empty();
            if (have_prefixes) set = load_prefix_set(ver_prefixes);

            std::vector<std::string> held_out;
            if (!ver_held.empty()) {
                if (!have_prefixes)
                    throw ConfigError("verify: --held-out needs --prefixes to build trigger probes");
                held_out = load_lines(ver_held);
                for (const auto& h : held_out) {
                    const SelectionResult s = select_prefix(model.backend(), set, h, sc);
                    probes.push_back(concat_prefix(s.chosen_prefix.text, h));
                }
            }

            const VerificationReport report = verify(model, records, clean, probes);
            json j;
            j["fsr"] = report.fsr;
            j["false_positive_rate"] = report.false_positive_rate;
            j["matched"] = report.matched;
            j["total"] = report.total;
            j["probe_count"] = report.probe_count;
            j["probe_false_positives"] = report.probe_false_positives;
            json outcomes = json::array();
            for (const auto& o : report.outcomes) {
                json e;
                e["id"] = o.id;
                e["decoded"] = o.decoded;
                e["matched"] = o.matched;
                outcomes.push_back(std::move(e));
            }
            j["records"] = std::move(outcomes);
            j["clean_decoded"] = report.clean_decoded;

            if (ver_defenses) {
                if (!have_prefixes)
                    throw ConfigError("verify: --defenses needs --prefixes for control prompts");
                // PPL filter analog: prefixed prompt vs plain prompt, plus a
                // seeded non-selected candidate as control.
                std::vector<std::pair<std::string, std::string>> pairs;
                for (const auto& r : records)
                    pairs.emplace_back(concat_prefix(r.tuple.e, r.tuple.p), r.tuple.p);
                std::vector<std::string> controls;
                if (!config.candidates_path.empty()) {
                    const auto all = load_candidate_texts(config.candidates_path);
                    std::set<std::string> chosen;
                    for (const auto& p : set.prefixes) chosen.insert(p.text);
                    std::vector<std::string> unchosen;
                    for (const auto& c : all)
                        if (!chosen.count(c)) unchosen.push_back(c);
                    if (!unchosen.empty()) {
                        Rng rng(config.seed ^ 0xc0117701ULL);
                        for (const auto& r : records)
                            controls.push_back(
                                concat_prefix(unchosen[rng.index(unchosen.size())], r.tuple.p));
                    }
                }
                const PplDefenseReport d = ppl_defense(model.backend(), pairs, controls);
                json dj;
                dj["median_prefixed"] = d.median_prefixed;
                dj["median_plain"] = d.median_plain;
                dj["median_control"] = d.median_control;
                dj["prefixed_ppl"] = d.prefixed_ppl;
                dj["plain_ppl"] = d.plain_ppl;
                dj["control_ppl"] = d.control_ppl;
                if (!held_out.empty())
                    dj["similar_input_rate"] =
                        similar_input_probe(model, model.backend(), set, sc, records, held_out);
                j["defenses"] = std::move(dj);
            }
            emit(ver_out, j.dump(2) + "\n");
            return 0;
        }

        if (att->parsed()) {
            const auto records = load_records(att_fps);
            ToyModel model = model_for_weights(config, att_model, records);
            AttackConfig ac;
            ac.rank = att_rank;
            ac.steps = att_steps;
            ac.step_size = att_step_size;
            ac.seed = att_seed;
            ac.downstream = make_downstream_bank(model, att_down, att_seed, att_repair);
            const AttackTrace trace = simulate_finetune(model, ac, records);
            emit(att_out, attack_trace_json(ac, att_down, trace).dump(2) + "\n");
            return 0;
        }

        if (rep->parsed()) return run_report(rep_inputs, rep_out);

        if (pipe->parsed()) {
            if (g.config_path.empty()) throw ConfigError("pipeline: --config is required");
            const PipelineOutcome outcome = run_pipeline(config);
            std::printf("fsr=%.4f fp=%.4f change_rate=%.6f locality=%s contract=%s\n",
                        outcome.report.fsr, outcome.report.false_positive_rate, outcome.change_rate,
                        outcome.locality_ok ? "ok" : "VIOLATED",
                        outcome.contract_ok ? "ok" : "VIOLATED");
            if (!outcome.change_rate_ok)
                log_at(LogLevel::warn, "change rate " + std::to_string(outcome.change_rate) +
                                           " exceeds the 0.03 bound");
            if (!outcome.contract_ok) {
                log_at(LogLevel::error,
                       "verification contract violated: fsr or false-positive bound missed");
                return 3;
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        log_at(LogLevel::error, e.what());
        return 2;
    } catch (const IoError& e) {
        log_at(LogLevel::error, e.what());
        return 2;
    } catch (const Error& e) {
        log_at(LogLevel::error, e.what());
        return 1;
    } catch (const std::exception& e) {
        log_at(LogLevel::error, e.what());
        return 1;
    }
    return 0;
}
