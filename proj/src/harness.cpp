#include "diamond/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "diamond/rng.hpp"
#include "json.hpp"

namespace diamond {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt17(*v) : std::string(); }

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out << content;
}

std::size_t pool_size() {
    if (const char* env = std::getenv("DIAMOND_THREADS")) {
        const long v = std::atol(env);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

GuidanceConfig baseline_config(const ExperimentConfig& cfg) {
    // unguided: empty correction window, no regularizer
    GuidanceConfig b = cfg.guidance;
    b.lambda_start = b.lambda_end = 0.0;
    b.alpha = 0.0;
    b.normalize = true;
    b.tau_start = cfg.steps;
    b.tau_end = 0;
    return b;
}

SamplerPlan make_plan(const ExperimentConfig& cfg) {
    return cfg.family == Family::flow ? SamplerPlan::flow(cfg.steps)
                                      : SamplerPlan::diffusion(cfg.steps, cfg.sigma_max, cfg.sigma_kind);
}

struct VariantPlan {
    std::string name;
    GuidanceConfig cfg;
};

std::string trim_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::vector<VariantPlan> variant_plans(const ExperimentConfig& cfg) {
    std::vector<VariantPlan> plans;
    if (cfg.ablation.empty()) {
        plans.push_back({"guided", cfg.guidance});
    } else if (cfg.ablation == "norm_onoff") {
        plans.push_back({"guided", cfg.guidance});
        GuidanceConfig raw = cfg.guidance;
        raw.normalize = false;
        plans.push_back({"guided_nonorm", raw});
    } else if (cfg.ablation == "alpha_sweep") {
        for (double a : {0.0, 0.1, 0.5}) {
            GuidanceConfig g = cfg.guidance;
            g.alpha = a;
            plans.push_back({"alpha_" + trim_num(a), g});
        }
    } else if (cfg.ablation == "lambda_sweep") {
        struct Row { double ls, le, p; };
        // schedule comparison rows: constants, decaying ranges, both powers
        const Row rows[] = {{45, 45, 2}, {1, 1, 2}, {45, 1, 2}, {25, 1, 2},
                            {15, 1, 2}, {45, 1, 3}, {15, 1, 3}};
        for (const Row& r : rows) {
            GuidanceConfig g = cfg.guidance;
            g.lambda_start = r.ls;
            g.lambda_end = r.le;
            g.p = r.p;
            plans.push_back({"lam_" + trim_num(r.ls) + "_" + trim_num(r.le) + "_p" + trim_num(r.p), g});
        }
    } else {
        throw std::invalid_argument("unknown ablation preset: " + cfg.ablation);
    }
    return plans;
}

struct Row {
    std::uint64_t seed = 0;
    std::string variant;
    int artifact = 0;
    double apr = 0.0;
    std::optional<double> mae, mae_a, mae_na;
    double la_final = 0.0;
    Vec endpoint;
};

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::vector<Row> rows;
    std::vector<std::pair<std::string, Trajectory>> trajs;
};

SeedOutcome process_seed(const ExperimentConfig& cfg, const SamplerPlan& plan, const Field& field,
                         const std::vector<VariantPlan>& plans, std::uint64_t seed) {
    SeedOutcome out;
    out.seed = seed;
    try {
        const Vec x1 = initial_noise(cfg, seed);

        Trajectory base = run_trajectory(x1, plan, field, cfg.decoder, cfg.detector, baseline_config(cfg));
        const Grid base_image = decode(base.final_x, cfg.decoder);
        const ArtifactMask base_mask = eval_mask(base_image, cfg.detector);

        Row brow;
        brow.seed = seed;
        brow.variant = "baseline";
        brow.artifact = std::any_of(base_mask.v.begin(), base_mask.v.end(),
                                    [](double v) { return v >= 0.5; });
        brow.apr = artifact_pixel_ratio(base_mask);
        brow.la_final = artifact_loss(base_mask);
        brow.endpoint = base.final_x;
        out.rows.push_back(std::move(brow));
        out.trajs.emplace_back("baseline", std::move(base));

        for (const VariantPlan& vp : plans) {
            Trajectory traj = run_trajectory(x1, plan, field, cfg.decoder, cfg.detector, vp.cfg, &base_image);
            const Grid image = decode(traj.final_x, cfg.decoder);
            const ArtifactMask mask = eval_mask(image, cfg.detector);
            const MaeSplit split = mae_split(image, base_image, base_mask);

            Row row;
            row.seed = seed;
            row.variant = vp.name;
            row.artifact = std::any_of(mask.v.begin(), mask.v.end(), [](double v) { return v >= 0.5; });
            row.apr = artifact_pixel_ratio(mask);
            row.mae = split.mae;
            row.mae_a = split.mae_a;
            row.mae_na = split.mae_na;
            row.la_final = artifact_loss(mask);
            row.endpoint = traj.final_x;
            out.rows.push_back(std::move(row));
            out.trajs.emplace_back(vp.name, std::move(traj));
        }
        out.ok = true;
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

struct Stats {
    std::size_t n = 0;
    double mean = 0.0, stdev = 0.0;
};

Stats reduce(const std::vector<double>& xs) {
    Stats s;
    s.n = xs.size();
    if (xs.empty()) return s;
    double acc = 0.0;
    for (double x : xs) acc += x;
    s.mean = acc / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double q = 0.0;
        for (double x : xs) q += (x - s.mean) * (x - s.mean);
        s.stdev = std::sqrt(q / static_cast<double>(xs.size() - 1));
    }
    return s;
}

VariantSummary summarize(const std::string& name, const std::vector<const Row*>& rows) {
    VariantSummary v;
    v.name = name;
    v.n = rows.size();
    if (rows.empty()) return v;

    std::size_t flagged = 0;
    std::vector<double> aprs, maes, maes_a, maes_na;
    for (const Row* r : rows) {
        flagged += r->artifact;
        aprs.push_back(r->apr);
        if (r->mae) maes.push_back(*r->mae);
        if (r->mae_a) maes_a.push_back(*r->mae_a);
        if (r->mae_na) maes_na.push_back(*r->mae_na);
    }
    v.maf = 100.0 * static_cast<double>(flagged) / static_cast<double>(rows.size());
    const Stats apr = reduce(aprs);
    v.apr_mean = apr.mean;
    v.apr_std = apr.stdev;
    if (!maes.empty()) {
        const Stats s = reduce(maes);
        v.mae_mean = s.mean;
        v.mae_std = s.stdev;
    }
    if (!maes_a.empty()) {
        const Stats s = reduce(maes_a);
        v.mae_a_mean = s.mean;
        v.mae_a_std = s.stdev;
    }
    if (!maes_na.empty()) {
        const Stats s = reduce(maes_na);
        v.mae_na_mean = s.mean;
        v.mae_na_std = s.stdev;
    }
    return v;
}

std::string seed_list_hash(const std::vector<std::uint64_t>& seeds) {
    std::string joined;
    for (std::uint64_t s : seeds) {
        joined += std::to_string(s);
        joined += ',';
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(CounterRng::hash_str(joined)));
    return buf;
}

json summary_json(const VariantSummary& v) {
    json j;
    j["n"] = v.n;
    j["maf"] = v.maf;
    j["apr_mean"] = v.apr_mean;
    j["apr_std"] = v.apr_std;
    j["mae"] = v.mae_mean ? json(*v.mae_mean) : json(nullptr);
    j["mae_std"] = v.mae_std ? json(*v.mae_std) : json(nullptr);
    j["mae_a"] = v.mae_a_mean ? json(*v.mae_a_mean) : json(nullptr);
    j["mae_a_std"] = v.mae_a_std ? json(*v.mae_a_std) : json(nullptr);
    j["mae_na"] = v.mae_na_mean ? json(*v.mae_na_mean) : json(nullptr);
    j["mae_na_std"] = v.mae_na_std ? json(*v.mae_na_std) : json(nullptr);
    return j;
}

void write_traj_csv(const fs::path& path, const Trajectory& traj) {
    std::ostringstream out;
    out << "i,t,L_a,delta_norm,lambda_t,corrected,mask_max,mask_mean\n";
    for (const StepRecord& r : traj.records) {
        out << r.i << ',' << fmt17(r.t) << ',' << fmt17(r.la) << ',' << fmt17(r.delta_norm) << ','
            << fmt17(r.lambda) << ',' << (r.corrected ? 1 : 0) << ',' << fmt17(r.mask_max) << ','
            << fmt17(r.mask_mean) << '\n';
    }
    write_file(path, out.str());
}

void write_traj_json(const fs::path& path, const Trajectory& traj) {
    json steps = json::array();
    for (const StepRecord& r : traj.records) {
        steps.push_back({{"i", r.i}, {"t", r.t}, {"x", r.x}, {"x0_hat", r.x0_hat}});
    }
    json j;
    j["steps"] = std::move(steps);
    j["final_x"] = traj.final_x;
    write_file(path, j.dump());
}

}  // namespace

void ExperimentConfig::validate() const {
    mixture.validate();
    decoder.validate(mixture.dim());
    detector.validate();
    guidance.validate();
    if (steps == 0) throw std::invalid_argument("ExperimentConfig: steps must be >= 1");
    if (family == Family::diffusion) {
        if (!(sigma_max > 0.0)) throw std::invalid_argument("ExperimentConfig: sigma_max must be positive");
        if (field != "analytic") {
            throw std::invalid_argument("ExperimentConfig: trained fields are flow-family only");
        }
    }
    if (seeds.empty() && seed_count == 0) {
        throw std::invalid_argument("ExperimentConfig: need an explicit seed list or a (start_seed, count) range");
    }
    if (scenario.empty()) throw std::invalid_argument("ExperimentConfig: scenario id must be non-empty");
}

Vec initial_noise(const ExperimentConfig& cfg, std::uint64_t seed) {
    CounterRng rng = CounterRng::keyed(cfg.scenario, seed);
    Vec x1 = rng.gaussian_vec(cfg.dim());
    if (cfg.family == Family::diffusion) {
        for (double& v : x1) v *= cfg.sigma_max;
    }
    return x1;
}

std::unique_ptr<Field> make_field(const ExperimentConfig& cfg) {
    if (cfg.family == Family::diffusion) {
        return std::make_unique<MixtureNoiseField>(cfg.mixture);
    }
    if (cfg.field == "analytic") {
        return std::make_unique<MixtureVelocityField>(cfg.mixture);
    }
    return std::make_unique<MlpField>(MlpField::from_json(read_file(cfg.field)));
}

std::optional<SeedRecord> filter_seeds(const ExperimentConfig& cfg, std::uint64_t start_seed,
                                       std::size_t max_attempts) {
    const auto field = make_field(cfg);
    const SamplerPlan plan = make_plan(cfg);
    const GuidanceConfig baseline = baseline_config(cfg);

    for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
        const std::uint64_t seed = start_seed + attempt - 1;
        const Vec x1 = initial_noise(cfg, seed);
        const Trajectory traj = run_trajectory(x1, plan, *field, cfg.decoder, cfg.detector, baseline);
        const ArtifactMask mask = eval_mask(decode(traj.final_x, cfg.decoder), cfg.detector);
        // strictly above 0.5, unlike the >= used by the metrics
        if (std::any_of(mask.v.begin(), mask.v.end(), [](double v) { return v > 0.5; })) {
            return SeedRecord{cfg.scenario, seed, attempt};
        }
    }
    return std::nullopt;
}

std::vector<SeedRecord> collect_filtered_seeds(const ExperimentConfig& cfg, std::uint64_t start_seed,
                                               std::size_t count, std::size_t max_attempts) {
    std::vector<SeedRecord> records;
    std::uint64_t cursor = start_seed;
    while (records.size() < count) {
        const auto rec = filter_seeds(cfg, cursor, max_attempts);
        if (!rec) break;
        cursor = rec->seed + 1;
        records.push_back(*rec);
    }
    return records;
}

const VariantSummary& ExperimentResult::variant(const std::string& name) const {
    for (const auto& v : variants) {
        if (v.name == name) return v;
    }
    throw std::invalid_argument("no such variant in report: " + name);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    if (cfg.guidance.window_empty(cfg.steps)) {
        std::cerr << "warning: correction window is empty (tau_start + tau_end >= steps); "
                     "guidance never fires\n";
    }
    fs::create_directories(out_dir);

    ExperimentResult result;
    result.out_dir = out_dir;

    // resolve the seed set
    std::vector<std::uint64_t> seeds = cfg.seeds;
    if (seeds.empty()) {
        if (cfg.filter) {
            const auto records = collect_filtered_seeds(cfg, cfg.start_seed, cfg.seed_count, cfg.max_attempts);
            for (const auto& r : records) seeds.push_back(r.seed);
            if (seeds.size() < cfg.seed_count) {
                throw std::runtime_error("seed filtering exhausted after " + std::to_string(seeds.size()) +
                                         " of " + std::to_string(cfg.seed_count) + " requested seeds");
            }
        } else {
            for (std::size_t i = 0; i < cfg.seed_count; ++i) seeds.push_back(cfg.start_seed + i);
        }
    }
    result.seeds = seeds;

    const auto field = make_field(cfg);
    const SamplerPlan plan = make_plan(cfg);
    const std::vector<VariantPlan> plans = variant_plans(cfg);

    std::vector<SeedOutcome> outcomes(seeds.size());
    {
        std::atomic<std::size_t> next{0};
        const std::size_t workers = std::min(pool_size(), seeds.size());
        auto work = [&] {
            for (;;) {
                const std::size_t idx = next.fetch_add(1);
                if (idx >= seeds.size()) return;
                outcomes[idx] = process_seed(cfg, plan, *field, plans, seeds[idx]);
            }
        };
        std::vector<std::thread> threads;
        for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
        work();
        for (auto& t : threads) t.join();
    }

    // merge ordered by seed index for deterministic reports
    std::vector<const Row*> all_rows;
    for (const SeedOutcome& o : outcomes) {
        if (!o.ok) {
            std::cerr << "seed " << o.seed << " failed: " << o.error << '\n';
            result.failed_seeds.push_back(o.seed);
            continue;
        }
        for (const Row& r : o.rows) all_rows.push_back(&r);
    }
    result.all_ok = result.failed_seeds.empty();

    std::vector<std::string> variant_names{"baseline"};
    for (const auto& vp : plans) variant_names.push_back(vp.name);

    for (const std::string& name : variant_names) {
        std::vector<const Row*> rows;
        for (const Row* r : all_rows) {
            if (r->variant == name) rows.push_back(r);
        }
        result.variants.push_back(summarize(name, rows));
    }

    // metrics.csv: one row per seed per variant
    {
        std::ostringstream out;
        out << "scenario,seed,variant,artifact,apr,mae,mae_a,mae_na,la_final\n";
        for (const Row* r : all_rows) {
            out << cfg.scenario << ',' << r->seed << ',' << r->variant << ',' << r->artifact << ','
                << fmt17(r->apr) << ',' << fmt_opt(r->mae) << ',' << fmt_opt(r->mae_a) << ','
                << fmt_opt(r->mae_na) << ',' << fmt17(r->la_final) << '\n';
        }
        write_file(fs::path(out_dir) / "metrics.csv", out.str());
    }

    // endpoints.csv: final latents per run
    {
        std::ostringstream out;
        out << "seed,variant";
        for (std::size_t d = 0; d < cfg.dim(); ++d) out << ",x" << d;
        out << '\n';
        for (const Row* r : all_rows) {
            out << r->seed << ',' << r->variant;
            for (double v : r->endpoint) out << ',' << fmt17(v);
            out << '\n';
        }
        write_file(fs::path(out_dir) / "endpoints.csv", out.str());
    }

    // per-trajectory step streams
    for (const SeedOutcome& o : outcomes) {
        if (!o.ok) continue;
        for (const auto& [name, traj] : o.trajs) {
            const std::string stem = "traj_" + std::to_string(o.seed) + "_" + name;
            write_traj_csv(fs::path(out_dir) / (stem + ".csv"), traj);
            if (cfg.dump_latents) write_traj_json(fs::path(out_dir) / (stem + ".json"), traj);
        }
    }

    // report.json
    {
        json j;
        j["scenario"] = cfg.scenario;
        j["family"] = cfg.family == Family::flow ? "flow" : "diffusion";
        j["steps"] = cfg.steps;
        j["ablation"] = cfg.ablation;
        j["n_seeds"] = seeds.size();
        j["seeds"] = seeds;
        j["failed_seeds"] = result.failed_seeds;
        j["seed_list_hash"] = seed_list_hash(seeds);
        json variants;
        for (const auto& v : result.variants) variants[v.name] = summary_json(v);
        j["variants"] = std::move(variants);
        write_file(fs::path(out_dir) / "report.json", j.dump(2));
    }

    return result;
}

void emit_plot_data(const std::string& report_dir, const std::string& out_dir) {
    if (!fs::is_directory(report_dir)) {
        throw std::invalid_argument("emit_plot_data: no report directory at " + report_dir);
    }
    if (!fs::exists(fs::path(report_dir) / "report.json")) {
        throw std::invalid_argument("emit_plot_data: missing report.json in " + report_dir);
    }
    fs::create_directories(out_dir);

    std::vector<fs::path> traj_files;
    for (const auto& entry : fs::directory_iterator(report_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("traj_", 0) == 0 && entry.path().extension() == ".csv") {
            traj_files.push_back(entry.path());
        }
    }
    std::sort(traj_files.begin(), traj_files.end());

    for (const fs::path& file : traj_files) {
        std::ifstream in(file);
        std::string line;
        std::getline(in, line);  // header
        std::ostringstream out;
        out << "t,L_a,delta_norm,lambda_t\n";
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string cell;
            std::vector<std::string> cells;
            while (std::getline(ss, cell, ',')) cells.push_back(cell);
            if (cells.size() < 5) continue;
            out << cells[1] << ',' << cells[2] << ',' << cells[3] << ',' << cells[4] << '\n';
        }
        const std::string stem = file.stem().string();  // traj_<seed>_<variant>
        write_file(fs::path(out_dir) / ("series_" + stem.substr(5) + ".csv"), out.str());
    }

    // endpoint scatter, 2D benchmarks only
    std::ostringstream scatter;
    scatter << "seed,variant,x0,x1\n";
    const fs::path endpoints = fs::path(report_dir) / "endpoints.csv";
    if (fs::exists(endpoints)) {
        std::ifstream in(endpoints);
        std::string line;
        std::getline(in, line);
        const bool two_d = line == "seed,variant,x0,x1";
        while (two_d && std::getline(in, line)) scatter << line << '\n';
    }
    write_file(fs::path(out_dir) / "scatter.csv", scatter.str());
}

// ---------------------------------------------------------------------------
// presets and config parsing
// ---------------------------------------------------------------------------

namespace {

ExperimentConfig make_two_mode_2d() {
    // two well-separated modes; the artifact region is a ball around mode A
    ExperimentConfig cfg;
    cfg.family = Family::flow;
    cfg.scenario = "two-mode-2d";
    cfg.mixture.weights = {0.5, 0.5};
    cfg.mixture.means = {{-20.0, 0.0}, {20.0, 0.0}};
    cfg.mixture.stds = {2.0, 2.0};
    cfg.decoder.kind = DecoderSpec::Kind::identity;
    cfg.decoder.h = 1;
    cfg.decoder.w = 2;
    cfg.detector.kind = DetectorSpec::Kind::radial;
    cfg.detector.centers = {{-20.0, 0.0}};
    cfg.detector.radii = {10.0};
    cfg.guidance.lambda_start = 8.0;
    cfg.guidance.lambda_end = 1.0;
    cfg.guidance.p = 2.0;
    cfg.steps = 10;
    cfg.start_seed = 4000;
    cfg.seed_count = 200;
    cfg.filter = true;
    return cfg;
}

ExperimentConfig make_two_mode_2d_diff() {
    ExperimentConfig cfg = make_two_mode_2d();
    cfg.family = Family::diffusion;
    cfg.scenario = "two-mode-2d-diff";
    cfg.sigma_max = 20.0;
    cfg.sigma_kind = SigmaKind::karras;
    cfg.steps = 30;
    cfg.guidance.lambda_start = 25.0;
    cfg.guidance.p = 2.0;
    cfg.guidance.tau_start = 0;
    cfg.guidance.tau_end = 5;  // late corrections would shove the state off-manifold
    return cfg;
}

ExperimentConfig make_grid_16() {
    ExperimentConfig cfg;
    cfg.family = Family::flow;
    cfg.scenario = "grid-16";
    cfg.mixture.weights = {0.5, 0.5};
    cfg.mixture.means = {{3.0, 0.5, 0.5, 0.5}, {1.2, 0.8, 0.3, 0.6}};
    cfg.mixture.stds = {0.25, 0.25};

    // four Gaussian bumps over a 16x16 grid, one per latent coordinate
    const std::size_t h = 16, w = 16, d = 4;
    const double bump_r[] = {4.0, 4.0, 12.0, 12.0};
    const double bump_c[] = {4.0, 12.0, 4.0, 12.0};
    const double width = 2.5;
    cfg.decoder.kind = DecoderSpec::Kind::linear;
    cfg.decoder.h = h;
    cfg.decoder.w = w;
    cfg.decoder.matrix.assign(h * w * d, 0.0);
    for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            for (std::size_t k = 0; k < d; ++k) {
                const double dr = static_cast<double>(i) - bump_r[k];
                const double dc = static_cast<double>(j) - bump_c[k];
                cfg.decoder.matrix[(i * w + j) * d + k] =
                    std::exp(-(dr * dr + dc * dc) / (2.0 * width * width));
            }
        }
    }

    cfg.detector.kind = DetectorSpec::Kind::patch;
    cfg.detector.centers = {{0.0}};
    cfg.detector.radii = {2.0};

    cfg.guidance.lambda_start = 1.0;
    cfg.guidance.lambda_end = 0.05;
    cfg.guidance.p = 2.0;
    cfg.steps = 10;
    cfg.start_seed = 4000;
    cfg.seed_count = 60;
    cfg.filter = true;
    return cfg;
}

GuidanceConfig parse_guidance(const json& j, GuidanceConfig base) {
    if (j.contains("lambda_start")) base.lambda_start = j.at("lambda_start").get<double>();
    if (j.contains("lambda_end")) base.lambda_end = j.at("lambda_end").get<double>();
    if (j.contains("p")) base.p = j.at("p").get<double>();
    if (j.contains("tau_start")) base.tau_start = j.at("tau_start").get<std::size_t>();
    if (j.contains("tau_end")) base.tau_end = j.at("tau_end").get<std::size_t>();
    if (j.contains("eps")) base.eps = j.at("eps").get<double>();
    if (j.contains("alpha")) base.alpha = j.at("alpha").get<double>();
    if (j.contains("normalize")) base.normalize = j.at("normalize").get<bool>();
    if (j.contains("mode")) {
        const std::string m = j.at("mode").get<std::string>();
        if (m == "detached" || m == "detached_velocity") base.mode = GradMode::detached_velocity;
        else if (m == "exact") base.mode = GradMode::exact;
        else throw std::invalid_argument("unknown gradient mode: " + m);
    }
    return base;
}

std::string subspec_text(const json& j) {
    // inline object, or a path to a spec file
    if (j.is_string()) return read_file(j.get<std::string>());
    return j.dump();
}

}  // namespace

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
    if (name == "two-mode-2d") return make_two_mode_2d();
    if (name == "two-mode-2d-diff") return make_two_mode_2d_diff();
    if (name == "grid-16") return make_grid_16();
    throw std::invalid_argument("unknown preset: " + name);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text,
                                             const std::vector<std::string>& overrides) {
    json j = json::parse(text);
    for (const std::string& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got: " + kv);
        std::string key = kv.substr(0, eq);
        const std::string value = kv.substr(eq + 1);
        for (char& c : key) {
            if (c == '.') c = '/';
        }
        json parsed;
        try {
            parsed = json::parse(value);
        } catch (const json::parse_error&) {
            parsed = value;  // bare string
        }
        j[json::json_pointer("/" + key)] = parsed;
    }

    ExperimentConfig cfg;
    if (j.contains("preset")) cfg = preset(j.at("preset").get<std::string>());

    if (j.contains("family")) cfg.family = family_from_string(j.at("family").get<std::string>());
    if (j.contains("scenario")) cfg.scenario = j.at("scenario").get<std::string>();
    if (j.contains("mixture")) cfg.mixture = MixtureSpec::from_json(subspec_text(j.at("mixture")));
    if (j.contains("decoder")) cfg.decoder = DecoderSpec::from_json(subspec_text(j.at("decoder")));
    if (j.contains("detector")) cfg.detector = DetectorSpec::from_json(subspec_text(j.at("detector")));
    if (j.contains("guidance")) cfg.guidance = parse_guidance(j.at("guidance"), cfg.guidance);
    if (j.contains("steps")) cfg.steps = j.at("steps").get<std::size_t>();
    if (j.contains("sigma_max")) cfg.sigma_max = j.at("sigma_max").get<double>();
    if (j.contains("sigma_kind")) cfg.sigma_kind = sigma_kind_from_string(j.at("sigma_kind").get<std::string>());
    if (j.contains("seeds")) {
        const json& s = j.at("seeds");
        if (s.is_array()) {
            cfg.seeds = s.get<std::vector<std::uint64_t>>();
        } else {
            cfg.seeds.clear();
            cfg.start_seed = s.value("start_seed", cfg.start_seed);
            cfg.seed_count = s.value("count", cfg.seed_count);
            cfg.filter = s.value("filtered", cfg.filter);
        }
    }
    if (j.contains("ablation")) cfg.ablation = j.at("ablation").is_null() ? "" : j.at("ablation").get<std::string>();
    if (j.contains("field")) cfg.field = j.at("field").get<std::string>();
    if (j.contains("dump_latents")) cfg.dump_latents = j.at("dump_latents").get<bool>();

    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path,
                                                  const std::vector<std::string>& overrides) {
    return from_json(read_file(path), overrides);
}

}  // namespace diamond
