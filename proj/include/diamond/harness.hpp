#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "diamond/guidance.hpp"
#include "diamond/metrics.hpp"

namespace diamond {

struct ExperimentConfig {
    Family family = Family::flow;
    std::string scenario = "experiment";
    MixtureSpec mixture;
    DecoderSpec decoder;
    DetectorSpec detector;
    GuidanceConfig guidance;
    std::size_t steps = 10;
    double sigma_max = 1.0;                      // diffusion family
    SigmaKind sigma_kind = SigmaKind::karras;    // diffusion family

    std::vector<std::uint64_t> seeds;            // explicit list, or
    std::uint64_t start_seed = 0;                // (start, count) range
    std::size_t seed_count = 0;
    bool filter = false;                         // accept-loop the range seeds
    std::size_t max_attempts = 1000;

    std::string ablation;                        // "", alpha_sweep, lambda_sweep, norm_onoff
    std::string field = "analytic";              // or path to a trained field json
    bool dump_latents = false;

    void validate() const;
    std::size_t dim() const { return mixture.dim(); }

    static ExperimentConfig preset(const std::string& name);
    static ExperimentConfig from_json(const std::string& text,
                                      const std::vector<std::string>& overrides = {});
    static ExperimentConfig from_json_file(const std::string& path,
                                           const std::vector<std::string>& overrides = {});
};

struct SeedRecord {
    std::string scenario;
    std::uint64_t seed = 0;
    std::size_t attempts = 0;
};

// Accept loop over seeds start, start+1, ...: run the unguided baseline and
// accept the first whose final mask has any cell strictly above 0.5. Returns
// nothing after max_attempts.
std::optional<SeedRecord> filter_seeds(const ExperimentConfig& cfg, std::uint64_t start_seed,
                                       std::size_t max_attempts = 1000);

// Collect `count` accepted seeds, each search resuming after the previous hit.
std::vector<SeedRecord> collect_filtered_seeds(const ExperimentConfig& cfg, std::uint64_t start_seed,
                                               std::size_t count, std::size_t max_attempts = 1000);

struct VariantSummary {
    std::string name;
    std::size_t n = 0;
    double maf = 0.0;
    double apr_mean = 0.0, apr_std = 0.0;
    std::optional<double> mae_mean, mae_std;
    std::optional<double> mae_a_mean, mae_a_std;
    std::optional<double> mae_na_mean, mae_na_std;
};

struct ExperimentResult {
    std::vector<std::uint64_t> seeds;
    std::vector<std::uint64_t> failed_seeds;
    std::vector<VariantSummary> variants;
    std::string out_dir;
    bool all_ok = false;

    const VariantSummary& variant(const std::string& name) const;
};

// Baseline plus guided runs (and ablation variants) per seed, worker pool
// sized by DIAMOND_THREADS. Writes report.json, metrics.csv, endpoints.csv
// and per-trajectory step CSVs under out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

// Per-step series and (for 2D benchmarks) endpoint scatter CSVs under
// out_dir, derived from an existing report directory.
void emit_plot_data(const std::string& report_dir, const std::string& out_dir);

// Initial noise shared by a baseline/guided pair, keyed by (scenario, seed).
Vec initial_noise(const ExperimentConfig& cfg, std::uint64_t seed);

std::unique_ptr<Field> make_field(const ExperimentConfig& cfg);

}  // namespace diamond
