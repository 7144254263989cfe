// Command-line front end: validation, graph checks, simulation, estimation,
// bootstrap intervals and sensitivity grids, driven by a key-value config.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sepcr/causal_graph.hpp"
#include "sepcr/estimators.hpp"
#include "sepcr/event_history.hpp"
#include "sepcr/oracle_sim.hpp"
#include "sepcr/weights.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sepcr;

namespace {

// exit codes: 0 ok, 1 data findings, 2 usage, 3 model failure,
// 4 positivity breach, 5 internal
constexpr int kExitFindings = 1;
constexpr int kExitUsage = 2;
constexpr int kExitModel = 3;
constexpr int kExitPositivity = 4;
constexpr int kExitInternal = 5;

struct TGridEntry {
    std::string label;
    std::vector<double> constants;  // piecewise-constant in k
    std::string covariate;          // linear part, optional
    double slope = 0.0;
};

struct RunConfig {
    std::string text;  // verbatim, for the manifest
    std::optional<std::string> data_path;
    std::optional<std::string> dgp_path;
    std::size_t n_subjects = 0;
    int horizon = -1;
    CovariateSchema schema;
    NuisanceFormulas formulas;
    std::vector<std::pair<int, int>> regimes;
    std::vector<std::string> estimators;  // nu1 nu2 gformula aj
    int bootstrap_b = 500;
    std::uint64_t seed = 1;
    int threads = 1;
    std::optional<double> truncate_percentile;
    std::vector<TGridEntry> tgrid;
};

std::string strip(const std::string& s) {
    auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> words(const std::string& s) {
    std::istringstream ss(s);
    std::vector<std::string> out;
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    RunConfig cfg;
    cfg.text = buf.str();

    std::istringstream lines(cfg.text);
    std::string line;
    int lineno = 0;
    bool lad_block_given = false;
    while (std::getline(lines, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = strip(line);
        if (line.empty()) continue;
        auto fail = [&](const std::string& m) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + m);
        };

        if (line.rfind("covariate ", 0) == 0) {
            auto toks = words(line);
            if (toks.size() != 4) fail("covariate <name> <kind> <timing>");
            CovariateSpec spec;
            spec.name = toks[1];
            if (toks[2] == "binary") {
                spec.kind = CovariateKind::Binary;
            } else if (toks[2] == "continuous") {
                spec.kind = CovariateKind::Continuous;
            } else if (toks[2].rfind("categorical(", 0) == 0 && toks[2].back() == ')') {
                spec.kind = CovariateKind::Categorical;
                spec.cardinality = std::stoi(toks[2].substr(12, toks[2].size() - 13));
            } else {
                fail("kind must be binary, categorical(n) or continuous");
            }
            if (toks[3] == "baseline")
                spec.timing = CovariateTiming::Baseline;
            else if (toks[3] == "timevarying")
                spec.timing = CovariateTiming::TimeVarying;
            else
                fail("timing must be baseline or timevarying");
            cfg.schema.entries.push_back(spec);
            continue;
        }
        if (line.rfind("tgrid ", 0) == 0 || line == "tgrid") {
            auto toks = words(line);
            if (toks.size() < 2) fail("tgrid const <values...> | tgrid linear <cov> <slope> [k-constants...]");
            TGridEntry e;
            if (toks[1] == "const") {
                e.label = "const";
                for (std::size_t i = 2; i < toks.size(); ++i) {
                    e.constants.push_back(std::stod(toks[i]));
                    e.label += (i == 2 ? ":" : "/") + toks[i];
                }
                if (e.constants.empty()) fail("tgrid const needs at least one value");
            } else if (toks[1] == "linear") {
                if (toks.size() < 4) fail("tgrid linear <cov> <slope> [k-constants...]");
                e.covariate = toks[2];
                e.slope = std::stod(toks[3]);
                e.label = "linear:" + toks[2] + ":" + toks[3];
                for (std::size_t i = 4; i < toks.size(); ++i)
                    e.constants.push_back(std::stod(toks[i]));
                if (e.constants.empty()) e.constants.push_back(0.0);
            } else {
                fail("tgrid kind must be const or linear");
            }
            cfg.tgrid.push_back(std::move(e));
            continue;
        }

        auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (key == "data") {
            cfg.data_path = value;
        } else if (key == "dgp") {
            cfg.dgp_path = value;
        } else if (key == "n") {
            cfg.n_subjects = static_cast<std::size_t>(std::stoull(value));
        } else if (key == "horizon") {
            cfg.horizon = std::stoi(value);
        } else if (key == "lad_block") {
            lad_block_given = true;
            if (value != "none")
                for (const auto& w : words(value)) cfg.formulas.partition.lad_block.push_back(w);
        } else if (key == "model.y_hazard") {
            cfg.formulas.y_hazard = value;
        } else if (key == "model.d_hazard") {
            cfg.formulas.d_hazard = value;
        } else if (key == "model.c_hazard") {
            cfg.formulas.c_hazard = value;
        } else if (key == "model.a_lad") {
            cfg.formulas.a_given_lad_past = value;
        } else if (key == "model.a_past") {
            cfg.formulas.a_given_past = value;
        } else if (key == "model.a_full") {
            cfg.formulas.a_given_full_l = value;
        } else if (key == "regimes") {
            for (const auto& w : words(value)) {
                auto comma = w.find(',');
                if (comma == std::string::npos) fail("regime must be aY,aD");
                cfg.regimes.emplace_back(std::stoi(w.substr(0, comma)),
                                         std::stoi(w.substr(comma + 1)));
            }
        } else if (key == "estimators") {
            cfg.estimators = words(value);
        } else if (key == "bootstrap_b") {
            cfg.bootstrap_b = std::stoi(value);
        } else if (key == "seed") {
            cfg.seed = std::stoull(value);
        } else if (key == "threads") {
            cfg.threads = std::stoi(value);
        } else if (key == "truncate_percentile") {
            if (!value.empty()) cfg.truncate_percentile = std::stod(value);
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    if (cfg.horizon < 0) throw ConfigError("config must set horizon");
    if (!lad_block_given)
        for (const auto& e : cfg.schema.entries)
            if (e.timing == CovariateTiming::TimeVarying)
                cfg.formulas.partition.lad_block.push_back(e.name);
    if (cfg.regimes.empty()) cfg.regimes = {{1, 1}, {0, 0}, {1, 0}};
    if (cfg.estimators.empty()) cfg.estimators = {"nu2", "aj"};
    return cfg;
}

EventHistoryDataset load_config_data(const RunConfig& cfg) {
    if (cfg.data_path) return load_long_csv(*cfg.data_path, cfg.schema, cfg.horizon);
    if (cfg.dgp_path) {
        const DgpSpec dgp = load_dgp(*cfg.dgp_path);
        if (cfg.n_subjects == 0) throw ConfigError("dgp input needs n = <subjects>");
        return simulate(dgp, cfg.n_subjects, cfg.seed);
    }
    throw ConfigError("config needs data = <csv> or dgp = <file>");
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

SensitivityFunction make_t(const TGridEntry& e, const CovariateSchema& schema) {
    int cov_index = -1;
    if (!e.covariate.empty()) {
        cov_index = schema.index_of(e.covariate);
        if (cov_index < 0) throw ConfigError("tgrid references unknown covariate " + e.covariate);
    }
    return [e, cov_index](int k, std::span<const IntervalRecord> history, int) {
        double t = e.constants[std::min(static_cast<std::size_t>(k), e.constants.size() - 1)];
        if (cov_index >= 0)
            t += e.slope * history.back().l[static_cast<std::size_t>(cov_index)];
        return t;
    };
}

struct PipelineOutput {
    std::vector<RiskCurve> curves;
    std::vector<EffectEstimate> effects;
    std::vector<std::string> warnings;
    std::map<std::string, json> diagnostics;
};

PipelineOutput run_pipeline(const RunConfig& cfg, const EventHistoryDataset& ds) {
    PipelineOutput out;
    EstimatorOptions eopts;
    eopts.truncate_percentile = cfg.truncate_percentile;

    const bool wants_nu1 =
        std::count(cfg.estimators.begin(), cfg.estimators.end(), "nu1") > 0;
    const bool wants_nu2 =
        std::count(cfg.estimators.begin(), cfg.estimators.end(), "nu2") > 0;
    const bool wants_gf =
        std::count(cfg.estimators.begin(), cfg.estimators.end(), "gformula") > 0;
    const bool wants_aj = std::count(cfg.estimators.begin(), cfg.estimators.end(), "aj") > 0;

    std::optional<NuisanceSet> ns;
    if (wants_nu1 || wants_nu2) {
        ns = fit_nuisances(ds, cfg.formulas);
        out.warnings = ns->warnings;
        auto model_diag = [](const FittedModel& m) {
            return json{{"converged", m.converged},
                        {"iterations", m.iterations},
                        {"loglik", m.loglik},
                        {"max_abs_score", m.max_abs_score},
                        {"columns", m.column_names.size()}};
        };
        out.diagnostics["y_hazard"] = model_diag(ns->y_hazard);
        out.diagnostics["d_hazard"] = model_diag(ns->d_hazard);
        if (ns->c_hazard) out.diagnostics["c_hazard"] = model_diag(*ns->c_hazard);
        if (ns->a_given_lad_past) out.diagnostics["a_lad"] = model_diag(*ns->a_given_lad_past);
        if (ns->a_given_past) out.diagnostics["a_past"] = model_diag(*ns->a_given_past);
        if (ns->a_given_full_l) out.diagnostics["a_full"] = model_diag(*ns->a_given_full_l);
    }

    std::vector<RiskCurve> nu1_curves, nu2_curves, gf_curves, aj_curves;
    for (const auto& [ay, ad] : cfg.regimes) {
        if (wants_nu1)
            nu1_curves.push_back(estimate_nu1(ds, *ns, ay, ad, cfg.horizon, eopts));
        if (wants_nu2)
            nu2_curves.push_back(estimate_nu2(ds, *ns, ay, ad, cfg.horizon, eopts));
        if (wants_gf) {
            GFormulaOptions gopts;
            gopts.lad_block = cfg.formulas.partition.lad_block;
            gf_curves.push_back(gformula_plugin(ds, ay, ad, cfg.horizon, gopts));
        }
    }
    if (wants_aj) {
        CensorModel cm = CensorModel::none();
        bool any_censoring = false;
        for (const auto& s : ds.subjects)
            for (const auto& r : s.records) any_censoring |= r.c_next == 1;
        if (any_censoring) {
            if (!cfg.formulas.c_hazard || *cfg.formulas.c_hazard == "none")
                throw ConfigError("censored data: the weighted incidence needs model.c_hazard");
            cm = CensorModel::fitted(fit_model(
                parse_formula(*cfg.formulas.c_hazard, OutcomeRole::CHazard, ds.schema), ds));
        }
        for (int arm = 0; arm <= 1; ++arm) {
            aj_curves.push_back(
                ipcw_aalen_johansen(ds, cm, Cause::EventOfInterest, arm, cfg.horizon));
            aj_curves.push_back(
                ipcw_aalen_johansen(ds, cm, Cause::CompetingEvent, arm, cfg.horizon));
        }
    }

    for (auto* group : {&nu1_curves, &nu2_curves, &gf_curves, &aj_curves}) {
        if (group->empty()) continue;
        try {
            auto effects = effect_contrasts(*group);
            out.effects.insert(out.effects.end(), effects.begin(), effects.end());
        } catch (const MissingRegime&) {
            // curves alone are still reported
        }
        out.curves.insert(out.curves.end(), group->begin(), group->end());
    }
    return out;
}

// flattens the pipeline into one vector so bootstrap resamples stay aligned
std::vector<double> flatten(const PipelineOutput& out) {
    std::vector<double> v;
    for (const auto& c : out.curves) v.insert(v.end(), c.values.begin(), c.values.end());
    for (const auto& e : out.effects) v.insert(v.end(), e.point.begin(), e.point.end());
    return v;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << content;
}

json manifest_base(const RunConfig& cfg) {
    json m;
    m["config"] = cfg.text;
    m["config_hash"] = fnv1a(cfg.text);
    m["seed"] = cfg.seed;
    m["estimators"] = cfg.estimators;
    m["lad_block"] = cfg.formulas.partition.lad_block;
    if (cfg.truncate_percentile)
        m["truncate_percentile"] = *cfg.truncate_percentile;
    else
        m["truncate_percentile"] = nullptr;
    return m;
}

int run_validate(const std::string& config_path, const std::string& data_override) {
    RunConfig cfg = parse_config(config_path);
    if (!data_override.empty()) cfg.data_path = data_override;
    const EventHistoryDataset ds = load_config_data(cfg);
    const ValidationReport rep = validate(ds);
    std::cout << rep.to_string();
    std::cout << (rep.clean() ? "ok: " : "findings: ") << ds.n_subjects() << " subjects, "
              << ds.n_records() << " person-intervals\n";
    return rep.clean() ? 0 : kExitFindings;
}

int run_check_graph(const std::string& graph_path, const std::string& partition_arg) {
    const CausalGraph g = load_graph(graph_path);
    std::string isolation;
    try {
        isolation = to_string(check_isolation(g));
    } catch (const NoDecomposition&) {
        std::cout << "isolation: treatment is not decomposed\n";
        return 0;
    }
    std::cout << "isolation: " << isolation << "\n";
    if (auto zk = find_zk_partition(g)) {
        std::cout << "Z split: holds (";
        bool first = true;
        for (const auto& [node, block] : zk->assignment) {
            std::cout << (first ? "" : ", ") << node << (block == Block::AY ? ":ay" : ":ad");
            first = false;
        }
        std::cout << ")\n";
    } else {
        std::cout << "Z split: fails for every assignment\n";
    }
    if (!partition_arg.empty()) {
        NodeSplit split;
        for (const auto& item : words(partition_arg)) {
            auto eq = item.find('=');
            if (eq == std::string::npos)
                throw ConfigError("partition items look like NODE=ay or NODE=ad");
            const std::string node = item.substr(0, eq);
            const std::string block = item.substr(eq + 1);
            split.assignment[node] = block == "ay" ? Block::AY : Block::AD;
        }
        std::cout << check_dismissible(g, split).to_string();
    } else {
        const auto passing = search_partitions(g);
        std::cout << "dismissible partitions: " << passing.size() << " of "
                  << (std::size_t(1) << measured_covariate_nodes(g).size()) << " pass\n";
        for (const auto& split : passing) {
            bool first = true;
            for (const auto& [node, block] : split.assignment) {
                std::cout << (first ? "  " : ", ") << node
                          << (block == Block::AY ? ":ay" : ":ad");
                first = false;
            }
            if (!split.assignment.empty()) std::cout << "\n";
        }
        if (passing.empty()) {
            NodeSplit all_ad;
            for (const auto& node : measured_covariate_nodes(g))
                all_ad.assignment[node] = Block::AD;
            std::cout << check_dismissible(g, all_ad).to_string();
        }
    }
    return 0;
}

int run_simulate(const std::string& dgp_path, std::size_t n, std::uint64_t seed,
                 const std::string& out_dir) {
    const DgpSpec dgp = load_dgp(dgp_path);
    fs::create_directories(out_dir);
    if (dgp.design == TrialDesign::TwoArm) {
        const EventHistoryDataset ds = simulate(dgp, n, seed);
        write_file(fs::path(out_dir) / "data.csv", to_csv(ds));
    } else {
        const FourArmDataset ds = simulate_four_arm(dgp, n, seed);
        write_file(fs::path(out_dir) / "data.csv", to_csv(ds));
    }
    std::cout << "wrote " << (fs::path(out_dir) / "data.csv").string() << "\n";
    return 0;
}

int run_estimate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override, bool with_bootstrap) {
    RunConfig cfg = parse_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    const EventHistoryDataset ds = load_config_data(cfg);
    PipelineOutput out = run_pipeline(cfg, ds);

    json manifest = manifest_base(cfg);
    manifest["n_subjects"] = ds.n_subjects();
    manifest["n_records"] = ds.n_records();
    manifest["warnings"] = out.warnings;
    for (const auto& [k, v] : out.diagnostics) manifest["models"][k] = v;
    int clipped = 0;
    for (const auto& c : out.curves) clipped += c.needs_clipping() ? 1 : 0;
    manifest["curves_clipped_for_reporting"] = clipped;

    if (with_bootstrap && cfg.bootstrap_b > 0) {
        const RunConfig& cfg_ref = cfg;
        CurveEstimator est = [&cfg_ref](const EventHistoryDataset& d) {
            return flatten(run_pipeline(cfg_ref, d));
        };
        const BootstrapResult bs =
            bootstrap_ci(ds, est, cfg.bootstrap_b, cfg.seed, cfg.threads);
        std::size_t pos = 0;
        auto take = [&](std::size_t len, std::vector<double>& lo, std::vector<double>& hi) {
            lo.assign(bs.ci_low.begin() + static_cast<long>(pos),
                      bs.ci_low.begin() + static_cast<long>(pos + len));
            hi.assign(bs.ci_high.begin() + static_cast<long>(pos),
                      bs.ci_high.begin() + static_cast<long>(pos + len));
            pos += len;
        };
        for (auto& c : out.curves) take(c.values.size(), c.ci_low, c.ci_high);
        for (auto& e : out.effects) {
            take(e.point.size(), e.ci_low, e.ci_high);
            e.resamples = bs.resamples - bs.failed;
        }
        manifest["bootstrap"] = {{"requested", bs.resamples}, {"failed", bs.failed}};
    }

    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "results.csv", results_csv(out.curves, out.effects));
    write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
    std::cout << "wrote " << (fs::path(out_dir) / "results.csv").string() << "\n";
    return 0;
}

int run_sensitivity(const std::string& config_path, const std::string& out_dir,
                    std::optional<std::uint64_t> seed_override) {
    RunConfig cfg = parse_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    if (cfg.tgrid.empty()) throw ConfigError("sensitivity needs at least one tgrid line");
    const EventHistoryDataset ds = load_config_data(cfg);
    const NuisanceSet ns = fit_nuisances(ds, cfg.formulas);
    EstimatorOptions eopts;
    eopts.truncate_percentile = cfg.truncate_percentile;

    std::vector<RiskCurve> curves;
    std::vector<std::string> labels;
    for (const auto& entry : cfg.tgrid) {
        const SensitivityFunction t = make_t(entry, ds.schema);
        for (const auto& [ay, ad] : cfg.regimes) {
            RiskCurve c = estimate_nu2_dagger(ds, ns, ay, ad, cfg.horizon, t, eopts);
            curves.push_back(std::move(c));
            labels.push_back(entry.label);
        }
    }
    std::ostringstream os;
    os << "k,regime,estimate,ci_low,ci_high,estimator_tag\n";
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto reported = curves[i].clipped();
        // the grid label rides inside the regime cell
        for (std::size_t k = 0; k < reported.size(); ++k)
            os << k << "," << curves[i].regime.to_string() << ";t=" << labels[i] << ","
               << format_double(reported[k]) << ",,," << to_string(curves[i].tag) << "\n";
    }
    fs::create_directories(out_dir);
    write_file(fs::path(out_dir) / "sensitivity.csv", os.str());
    json manifest = manifest_base(cfg);
    manifest["tgrid_rows"] = cfg.tgrid.size();
    write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");
    std::cout << "wrote " << (fs::path(out_dir) / "sensitivity.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"separable-effects estimation for competing events"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", data_path, graph_path, partition_arg, dgp_path;
    std::size_t n = 0;
    std::optional<std::uint64_t> seed;
    std::uint64_t seed_value = 0;

    auto* validate_cmd = app.add_subcommand("validate", "check a dataset against the format rules");
    validate_cmd->add_option("--config", config_path)->required();
    validate_cmd->add_option("--data", data_path);

    auto* graph_cmd = app.add_subcommand("check-graph", "classify a causal graph");
    graph_cmd->add_option("--graph", graph_path)->required();
    graph_cmd->add_option("--partition", partition_arg,
                          "e.g. \"L1=ad L0=ad\"; omitted = search all");

    auto* sim_cmd = app.add_subcommand("simulate", "draw a trial from a data-generating spec");
    sim_cmd->add_option("--dgp", dgp_path)->required();
    sim_cmd->add_option("--n", n)->required();
    sim_cmd->add_option("--seed", seed_value);
    sim_cmd->add_option("--out", out_dir);

    auto* est_cmd = app.add_subcommand("estimate", "risk curves and contrasts");
    est_cmd->add_option("--config", config_path)->required();
    est_cmd->add_option("--out", out_dir);
    est_cmd->add_option("--seed", seed_value);

    auto* boot_cmd = app.add_subcommand("bootstrap", "estimate with percentile intervals");
    boot_cmd->add_option("--config", config_path)->required();
    boot_cmd->add_option("--out", out_dir);
    boot_cmd->add_option("--seed", seed_value);

    auto* sens_cmd = app.add_subcommand("sensitivity", "offset-corrected estimator grid");
    sens_cmd->add_option("--config", config_path)->required();
    sens_cmd->add_option("--out", out_dir);
    sens_cmd->add_option("--seed", seed_value);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    auto seed_arg = [&](CLI::App* cmd) -> std::optional<std::uint64_t> {
        return cmd->count("--seed") > 0 ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
    };

    try {
        if (validate_cmd->parsed()) return run_validate(config_path, data_path);
        if (graph_cmd->parsed()) return run_check_graph(graph_path, partition_arg);
        if (sim_cmd->parsed()) return run_simulate(dgp_path, n, seed_value, out_dir);
        if (est_cmd->parsed())
            return run_estimate(config_path, out_dir, seed_arg(est_cmd),
                                /*with_bootstrap=*/false);
        if (boot_cmd->parsed())
            return run_estimate(config_path, out_dir, seed_arg(boot_cmd),
                                /*with_bootstrap=*/true);
        if (sens_cmd->parsed())
            return run_sensitivity(config_path, out_dir, seed_arg(sens_cmd));
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const PositivityBreach& e) {
        std::cerr << "positivity: " << e.what() << "\n";
        return kExitPositivity;
    } catch (const Separation& e) {
        std::cerr << "model: " << e.what() << "\n";
        return kExitModel;
    } catch (const SingularInformation& e) {
        std::cerr << "model: " << e.what() << "\n";
        return kExitModel;
    } catch (const NonConvergence& e) {
        std::cerr << "model: " << e.what() << "\n";
        return kExitModel;
    } catch (const NotConverged& e) {
        std::cerr << "model: " << e.what() << "\n";
        return kExitModel;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
