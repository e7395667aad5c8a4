#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "diamond/harness.hpp"
#include "json.hpp"

namespace {

diamond::ExperimentConfig load_config(const std::string& config_path, const std::string& preset,
                                      const std::vector<std::string>& overrides) {
    if (!config_path.empty()) return diamond::ExperimentConfig::from_json_file(config_path, overrides);
    if (!preset.empty()) {
        nlohmann::json j;
        j["preset"] = preset;
        return diamond::ExperimentConfig::from_json(j.dump(), overrides);
    }
    throw CLI::ValidationError("either --config or --preset is required");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diamond: artifact-aware trajectory correction for flow and diffusion samplers"};
    app.require_subcommand(1);

    std::string config_path, preset, out_dir, report_dir, field_out;
    std::vector<std::string> overrides;
    std::uint64_t start_seed = 0;
    std::size_t count = 1, max_attempts = 1000;
    std::vector<std::size_t> widths{64, 64};
    std::size_t train_steps = 4000;
    double lr = 3e-3;
    std::uint64_t train_seed = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_out) {
        cmd->add_option("--config", config_path, "experiment config JSON file");
        cmd->add_option("--preset", preset, "named preset: two-mode-2d, two-mode-2d-diff, grid-16");
        cmd->add_option("--set", overrides, "override a config key, e.g. guidance.lambda_start=5")
            ->take_all();
        auto* out = cmd->add_option("--out", out_dir, "output directory");
        if (needs_out) out->required();
    };

    auto* run_cmd = app.add_subcommand("run", "baseline/guided paired runs and metric reports");
    add_common(run_cmd, true);

    auto* filter_cmd = app.add_subcommand("filter-seeds", "collect seeds whose baseline output contains an artifact");
    add_common(filter_cmd, true);
    filter_cmd->add_option("--start-seed", start_seed, "first candidate seed");
    filter_cmd->add_option("--count", count, "number of accepted seeds to collect");
    filter_cmd->add_option("--max-attempts", max_attempts, "attempt budget per accepted seed");

    auto* plots_cmd = app.add_subcommand("emit-plots", "per-step series and endpoint scatter CSVs from a report");
    plots_cmd->add_option("--report", report_dir, "report directory produced by run")->required();
    plots_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* train_cmd = app.add_subcommand("train-field", "fit an MLP velocity field to the config's mixture");
    add_common(train_cmd, true);
    train_cmd->add_option("--widths", widths, "hidden layer widths");
    train_cmd->add_option("--train-steps", train_steps, "optimizer steps");
    train_cmd->add_option("--lr", lr, "learning rate");
    train_cmd->add_option("--seed", train_seed, "training seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            const auto cfg = load_config(config_path, preset, overrides);
            const auto result = diamond::run_experiment(cfg, out_dir);
            std::cout << "report written to " << result.out_dir << " (" << result.seeds.size()
                      << " seeds";
            if (!result.failed_seeds.empty()) std::cout << ", " << result.failed_seeds.size() << " failed";
            std::cout << ")\n";
            for (const auto& v : result.variants) {
                std::cout << "  " << v.name << ": maf=" << v.maf << " apr=" << v.apr_mean;
                if (v.mae_mean) std::cout << " mae=" << *v.mae_mean;
                std::cout << '\n';
            }
            return result.all_ok ? 0 : 1;
        }
        if (filter_cmd->parsed()) {
            auto cfg = load_config(config_path, preset, overrides);
            if (start_seed == 0) start_seed = cfg.start_seed;
            const auto records = diamond::collect_filtered_seeds(cfg, start_seed, count, max_attempts);
            std::filesystem::create_directories(out_dir);
            nlohmann::json j;
            j["scenario"] = cfg.scenario;
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& r : records) {
                arr.push_back({{"seed", r.seed}, {"attempts", r.attempts}});
            }
            j["records"] = std::move(arr);
            std::ofstream out(std::filesystem::path(out_dir) / "seeds.json");
            out << j.dump(2) << '\n';
            std::cout << "accepted " << records.size() << " of " << count << " requested seeds\n";
            return records.size() == count ? 0 : 1;
        }
        if (plots_cmd->parsed()) {
            diamond::emit_plot_data(report_dir, out_dir);
            std::cout << "plot data written to " << out_dir << '\n';
            return 0;
        }
        if (train_cmd->parsed()) {
            const auto cfg = load_config(config_path, preset, overrides);
            const auto report = diamond::train_mlp_velocity(cfg.mixture, widths, train_steps, lr, train_seed);
            std::filesystem::create_directories(out_dir);
            const auto path = std::filesystem::path(out_dir) / "field.json";
            std::ofstream out(path);
            out << report.field.to_json() << '\n';
            std::cout << "final loss " << report.final_loss << ", field written to " << path.string() << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
