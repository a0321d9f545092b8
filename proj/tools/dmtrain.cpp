// Experiment CLI: training runs, emphasis sweeps, EDF curve export, label
// noise injection and label correction.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dm/data.hpp"
#include "dm/edf.hpp"
#include "dm/harness.hpp"
#include "dm/network.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

dm::Dataset load_any(const std::string& path, std::size_t classes) {
    if (path.size() > 6 && path.substr(path.size() - 6) == ".dmbin") return dm::load_dmbin(path);
    return dm::load_csv(path, classes);
}

void save_any(const dm::Dataset& ds, const std::string& path) {
    if (path.size() > 6 && path.substr(path.size() - 6) == ".dmbin") dm::save_dmbin(ds, path);
    else dm::save_csv(ds, path);
}

int cmd_train(const std::string& config_path) {
    dm::RunConfig cfg = dm::parse_run_config(config_path);
    dm::RunResult result = dm::run_training(cfg);
    std::printf("scheme=%s best=%.6f@iter%llu final=%.6f\n", cfg.scheme.name().c_str(),
                result.best_val_accuracy,
                static_cast<unsigned long long>(result.best_iteration),
                result.final_val_accuracy);
    return kExitOk;
}

int cmd_sweep(const std::string& config_dir, const std::string& out_path) {
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(config_dir))
        if (entry.is_regular_file()) paths.push_back(entry.path().string());
    std::sort(paths.begin(), paths.end());

    std::vector<dm::RunConfig> configs;
    for (const auto& p : paths) configs.push_back(dm::parse_run_config(p));
    std::string csv = dm::render_sweep_csv(dm::sweep(configs));
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("sweep: cannot open " + out_path);
        out << csv;
    }
    return kExitOk;
}

int cmd_label_correct(const std::string& config_path, const std::string& checkpoint_path) {
    dm::RunConfig cfg = dm::parse_run_config(config_path);
    dm::Mlp net = dm::load_checkpoint(checkpoint_path, cfg.activation, cfg.dropout_rate);
    dm::PreparedData data = dm::prepare_data(cfg);
    dm::RunResult result = dm::label_correct_and_retrain(cfg, net, data.train, data.val);
    std::printf("label-correct best=%.6f@iter%llu final=%.6f\n", result.best_val_accuracy,
                static_cast<unsigned long long>(result.best_iteration),
                result.final_val_accuracy);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"derivative-manipulation experiment runner"};
    app.require_subcommand(1);

    std::string train_config;
    auto* train = app.add_subcommand("train", "run one training config");
    train->add_option("config", train_config, "run config file")->required();

    std::string sweep_dir, sweep_out;
    auto* sweep = app.add_subcommand("sweep", "run every config in a directory");
    sweep->add_option("config-dir", sweep_dir, "directory of run configs")->required();
    sweep->add_option("--out", sweep_out, "CSV output path (default stdout)");

    std::string curve_family = "unified", curve_loss = "cce", curve_out;
    double curve_lambda = 0.0, curve_beta = 0.0, curve_psi = 0.5;
    double curve_alpha = 1.0, curve_eta = 1.0, curve_q = 0.7;
    int curve_points = 101;
    bool have_beta = false;
    auto* curve = app.add_subcommand("edf-curve", "export an EDF as CSV");
    curve->add_option("--family", curve_family, "unified|ed|nd|bd|from_loss");
    curve->add_option("--lambda", curve_lambda, "unified lambda");
    curve->add_option("--beta", curve_beta, "variance control")->each([&](const std::string&) {
        have_beta = true;
    });
    curve->add_option("--psi", curve_psi, "nd emphasis mode");
    curve->add_option("--alpha", curve_alpha, "bd alpha");
    curve->add_option("--eta", curve_eta, "bd eta");
    curve->add_option("--loss", curve_loss, "from_loss base loss");
    curve->add_option("--q", curve_q, "gce q");
    curve->add_option("--points", curve_points, "sample count");
    curve->add_option("--out", curve_out, "output CSV path")->required();

    std::string cor_in, cor_out, cor_kind = "symmetric", cor_pairs;
    double cor_r = 0.0;
    std::uint64_t cor_seed = 0;
    std::size_t cor_classes = 2;
    auto* cor = app.add_subcommand("corrupt", "inject label noise into a dataset file");
    cor->add_option("input", cor_in, "input dataset (.csv or .dmbin)")->required();
    cor->add_option("output", cor_out, "output dataset (.csv or .dmbin)")->required();
    cor->add_option("--kind", cor_kind, "symmetric|asymmetric");
    cor->add_option("--r", cor_r, "corruption probability");
    cor->add_option("--pairs", cor_pairs, "asymmetric class pairs, e.g. 0:1,2:3");
    cor->add_option("--seed", cor_seed, "corruption seed");
    cor->add_option("--classes", cor_classes, "class count for csv input");

    std::string lc_config, lc_checkpoint;
    auto* lc = app.add_subcommand("label-correct", "relabel with a checkpoint and retrain");
    lc->add_option("config", lc_config, "run config file")->required();
    lc->add_option("checkpoint", lc_checkpoint, "trained model checkpoint")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*train) return cmd_train(train_config);
        if (*sweep) return cmd_sweep(sweep_dir, sweep_out);
        if (*curve) {
            dm::EdfFamily family;
            if (curve_family == "unified") {
                if (!have_beta) throw std::invalid_argument("edf-curve: --beta is required for unified");
                family = dm::EdfFamily::unified(curve_lambda, curve_beta);
            } else if (curve_family == "ed") {
                if (!have_beta) throw std::invalid_argument("edf-curve: --beta is required for ed");
                family = dm::EdfFamily::ed(curve_beta);
            } else if (curve_family == "nd") {
                if (!have_beta) throw std::invalid_argument("edf-curve: --beta is required for nd");
                family = dm::EdfFamily::nd(curve_psi, curve_beta);
            } else if (curve_family == "bd") {
                family = dm::EdfFamily::bd(curve_alpha, curve_eta);
            } else if (curve_family == "from_loss") {
                dm::LossKind kind;
                if (curve_loss == "cce") kind = dm::LossKind::cce();
                else if (curve_loss == "mae") kind = dm::LossKind::mae();
                else if (curve_loss == "mse") kind = dm::LossKind::mse();
                else if (curve_loss == "gce") kind = dm::LossKind::gce(curve_q);
                else throw std::invalid_argument("edf-curve: unknown --loss " + curve_loss);
                family = dm::EdfFamily::from_loss(kind);
            } else {
                throw std::invalid_argument("edf-curve: unknown --family " + curve_family);
            }
            dm::export_edf_curve(family, curve_points, curve_out);
            return kExitOk;
        }
        if (*cor) {
            dm::Dataset ds = load_any(cor_in, cor_classes);
            dm::CorruptionSpec spec;
            if (cor_kind == "symmetric") {
                spec.kind = dm::CorruptionKind::Symmetric;
            } else if (cor_kind == "asymmetric") {
                spec.kind = dm::CorruptionKind::Asymmetric;
                for (const auto& tok : {cor_pairs}) {
                    std::stringstream ss(tok);
                    std::string cell;
                    while (std::getline(ss, cell, ',')) {
                        auto colon = cell.find(':');
                        if (colon == std::string::npos)
                            throw std::invalid_argument("corrupt: --pairs entries must be 'a:b'");
                        spec.pairs.emplace_back(std::stoull(cell.substr(0, colon)),
                                                std::stoull(cell.substr(colon + 1)));
                    }
                }
            } else {
                throw std::invalid_argument("corrupt: unknown --kind " + cor_kind);
            }
            spec.rate = cor_r;
            save_any(dm::corrupt(ds, spec, cor_seed), cor_out);
            return kExitOk;
        }
        if (*lc) return cmd_label_correct(lc_config, lc_checkpoint);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitConfig;
}
