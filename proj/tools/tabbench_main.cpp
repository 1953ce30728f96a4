#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tabbench/data.hpp"
#include "tabbench/sweep.hpp"

namespace fs = std::filesystem;
using namespace tabbench;

namespace {

constexpr std::uint64_t kDefaultSeed = 20240214;  // documented default

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

void write_report(const std::string& path, const std::string& body, bool no_timestamp) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report " + path);
    if (!no_timestamp) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char buf[64];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        out << "# generated " << buf << "\n";
    }
    out << body;
}

data::SplitSpec split_spec_for(const data::DatasetSchema& schema, std::uint64_t seed) {
    data::SplitSpec spec;
    spec.seed = seed;
    spec.mode = schema.split_column ? data::SplitSpec::Mode::PredefinedColumn
                                    : data::SplitSpec::Mode::Random;
    return spec;
}

int cmd_prepare(const std::string& schema_path, const std::string& data_path,
                const std::string& out_dir, std::uint64_t seed) {
    const auto schema = data::DatasetSchema::from_json_file(schema_path);
    const auto raw = data::load_csv(data_path, schema);
    const auto ds = data::encode(raw, schema, split_spec_for(schema, seed));
    fs::create_directories(out_dir);
    const std::string cache = (fs::path(out_dir) / (ds.name + ".bin")).string();
    ds.save(cache);

    std::cout << "dataset " << ds.name << ": n=" << ds.n() << " d=" << ds.d() << "\n";
    std::cout << "split,group_0,group_1,group_2,group_3,total\n";
    for (auto split : {data::Split::Train, data::Split::Val, data::Split::Test}) {
        const char* name = split == data::Split::Train ? "train"
                           : split == data::Split::Val ? "val"
                                                       : "test";
        std::array<Eigen::Index, kNumGroups> counts{};
        const auto rows = ds.rows_in(split);
        for (auto r : rows) counts[static_cast<std::size_t>(ds.group_id(r))]++;
        std::cout << name;
        for (auto c : counts) std::cout << "," << c;
        std::cout << "," << rows.size() << "\n";
    }
    std::cout << "cache written to " << cache << "\n";
    return 0;
}

int cmd_sweep(const std::string& data_path, const std::string& grid_path, const std::string& out,
              std::uint64_t seed, int parallelism, const sweep::MetricLevels& levels) {
    const auto ds = data::TabularDataset::load(data_path);
    auto spec = sweep::GridSpec::from_json_file(grid_path);
    auto epochs_it = spec.epoch_overrides.find(ds.name);
    if (epochs_it != spec.epoch_overrides.end()) {
        spec.params["epochs"] = {sweep::Json(epochs_it->second)};
    }
    const auto configs = sweep::expand_grid(spec);
    std::cout << "grid: " << configs.size() << " configs (" << spec.family << ")\n";

    sweep::ResultStore store(out);
    int done = 0;
    const auto total = static_cast<int>(configs.size());
    auto tally = sweep::run_sweep(configs, ds, parallelism, seed, store, levels,
                                  [&](const sweep::RunRecord& r) {
                                      ++done;
                                      std::cout << "[" << done << "/" << total << "] " << r.id
                                                << " " << r.status << "\n";
                                  });
    std::cout << "sweep complete: " << tally.ok << " ok, " << tally.failed << " failed, "
              << tally.skipped << " skipped\n";
    return 0;
}

sweep::SelectionRule parse_rule(const std::string& name) {
    sweep::SelectionRule rule;
    if (name == "best_accuracy") rule.kind = sweep::RuleKind::BestAccuracy;
    else if (name == "best_worst_group") rule.kind = sweep::RuleKind::BestWorstGroup;
    else if (name == "best_cvar") rule.kind = sweep::RuleKind::BestCVaR;
    else if (name == "best_doro_cvar") rule.kind = sweep::RuleKind::BestDoroCVaR;
    else throw ConfigError("unknown selection rule '" + name + "'");
    return rule;
}

const sweep::RunRecord& record_by_id(const std::vector<sweep::RunRecord>& records,
                                     const std::string& id) {
    for (const auto& r : records) {
        if (r.id == id) return r;
    }
    throw ConfigError("config_id '" + id + "' not found in store");
}

void warn_grid_edges(const std::vector<sweep::RunRecord>& records,
                     const std::vector<sweep::FrontierRow>& rows, const std::string& grid_path) {
    const auto spec = sweep::GridSpec::from_json_file(grid_path);
    for (const auto& row : rows) {
        if (!row.on_frontier) continue;
        const auto& config = record_by_id(records, row.id).config;
        for (const auto& [param, values] : spec.params) {
            if (values.size() < 2 || !values.front().is_number()) continue;
            double lo = values.front().get<double>(), hi = lo;
            for (const auto& v : values) {
                lo = std::min(lo, v.get<double>());
                hi = std::max(hi, v.get<double>());
            }
            if (!config["params"].contains(param)) continue;
            const double x = config["params"][param].get<double>();
            if (x == lo || x == hi) {
                std::cerr << "warning: frontier config " << row.id << " sits at the grid edge of '"
                          << param << "' (" << fmt(x) << "); consider expanding the grid\n";
            }
        }
    }
}

int cmd_analyze(const std::string& analysis, const std::vector<std::string>& stores,
                const std::string& out_dir, const std::string& rule_name, double alpha,
                double epsilon, const std::string& split_name, const std::string& id_a,
                const std::string& id_b, const std::string& ci_group,
                const std::string& grid_path, bool no_timestamp) {
    (void)alpha;
    (void)epsilon;
    if (stores.empty()) throw ConfigError("analyze: at least one --store is required");
    fs::create_directories(out_dir);
    const data::Split split = split_name == "test" ? data::Split::Test : data::Split::Val;

    if (analysis == "frontier") {
        sweep::ResultStore store(stores.front());
        const auto records = store.load();
        const auto rows = sweep::frontier_report(records, split);
        std::ostringstream body;
        body << "config_id,m1,m2,on_frontier\n";
        for (const auto& r : rows) {
            body << r.id << "," << fmt(r.m1) << "," << fmt(r.m2) << ","
                 << (r.on_frontier ? 1 : 0) << "\n";
        }
        write_report((fs::path(out_dir) / "frontier.csv").string(), body.str(), no_timestamp);
        if (!grid_path.empty()) warn_grid_edges(records, rows, grid_path);
        return 0;
    }
    if (analysis == "select") {
        sweep::ResultStore store(stores.front());
        const auto records = store.load();
        std::vector<std::string> rules =
            rule_name.empty() ? std::vector<std::string>{"best_accuracy", "best_worst_group",
                                                         "best_cvar", "best_doro_cvar"}
                              : std::vector<std::string>{rule_name};
        std::ostringstream body;
        body << "rule,split,config_id,test_accuracy,test_worst_group_accuracy\n";
        for (const auto& name : rules) {
            auto rule = parse_rule(name);
            rule.split = split;
            const auto id = sweep::select(records, rule);
            const auto& rec = record_by_id(records, id);
            body << name << "," << (split == data::Split::Test ? "test" : "val") << "," << id
                 << "," << fmt(rec.test.accuracy) << "," << fmt(rec.test.worst_group_accuracy)
                 << "\n";
        }
        write_report((fs::path(out_dir) / "select.csv").string(), body.str(), no_timestamp);
        return 0;
    }
    if (analysis == "compare") {
        if (id_a.empty() || id_b.empty())
            throw ConfigError("analyze compare: --config-a and --config-b are required");
        sweep::ResultStore store(stores.front());
        const auto records = store.load();
        const auto& a = record_by_id(records, id_a);
        const auto& b = record_by_id(records, id_b);
        const auto group = ci_group == "worst" ? sweep::CiGroup::Worst : sweep::CiGroup::Overall;
        const auto cmp = sweep::compare_ci(a, b, group);
        std::ostringstream body;
        body << "group,config_a,config_b,lower_a,upper_a,lower_b,upper_b,significant\n";
        body << ci_group << "," << id_a << "," << id_b << "," << fmt(cmp.interval_a.lower) << ","
             << fmt(cmp.interval_a.upper) << "," << fmt(cmp.interval_b.lower) << ","
             << fmt(cmp.interval_b.upper) << "," << (cmp.significant ? 1 : 0) << "\n";
        write_report((fs::path(out_dir) / "compare.csv").string(), body.str(), no_timestamp);
        return 0;
    }
    if (analysis == "sensitivity") {
        std::map<std::string, std::vector<sweep::RunRecord>> by_dataset;
        for (const auto& path : stores) {
            sweep::ResultStore store(path);
            for (auto& r : store.load()) by_dataset[r.dataset].push_back(std::move(r));
        }
        auto rule = parse_rule(rule_name.empty() ? "best_accuracy" : rule_name);
        rule.split = split;
        const auto result = sweep::sensitivity(by_dataset, rule);
        {
            std::ostringstream body;
            body << "param,kind,min,max,values\n";
            for (const auto& [param, range] : result.kept_ranges) {
                if (range.is_object()) {
                    body << param << ",numeric," << fmt(range["min"].get<double>()) << ","
                         << fmt(range["max"].get<double>()) << ",\n";
                } else {
                    body << param << ",categorical,,," << range.dump() << "\n";
                }
            }
            write_report((fs::path(out_dir) / "sensitivity_ranges.csv").string(), body.str(),
                         no_timestamp);
        }
        for (const auto& [dataset, series] : result.series) {
            std::ostringstream body;
            body << "rank,config_id,metric,ci_width\n";
            for (const auto& p : series) {
                body << p.rank << "," << p.id << "," << fmt(p.metric) << "," << fmt(p.ci_width)
                     << "\n";
            }
            write_report((fs::path(out_dir) / ("sensitivity_" + dataset + ".csv")).string(),
                         body.str(), no_timestamp);
        }
        return 0;
    }
    if (analysis == "correlations") {
        sweep::ResultStore store(stores.front());
        const auto report = sweep::correlations(store.load(), split);
        std::ostringstream body;
        body << "metric";
        for (const auto& name : report.metric_names) body << "," << name;
        body << "\n";
        for (std::size_t a = 0; a < report.metric_names.size(); ++a) {
            body << report.metric_names[a];
            for (std::size_t b = 0; b < report.metric_names.size(); ++b) {
                body << ","
                     << fmt(report.r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
            }
            body << "\n";
        }
        write_report((fs::path(out_dir) / "correlations.csv").string(), body.str(), no_timestamp);
        return 0;
    }
    throw ConfigError("unknown analysis '" + analysis + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subgroup-robustness benchmark toolkit for tabular binary classification"};
    app.require_subcommand(1);

    std::string schema_path, data_path, grid_path, out_path, rule_name, split_name = "val";
    std::string analysis, id_a, id_b, ci_group = "overall";
    std::vector<std::string> store_paths;
    std::uint64_t seed = kDefaultSeed;
    int parallelism = 1;
    double alpha = 0.5, epsilon = 0.01;
    bool no_timestamp = false;

    auto* prepare = app.add_subcommand("prepare", "Encode a CSV dataset against a schema");
    prepare->add_option("--schema", schema_path, "dataset schema JSON")->required();
    prepare->add_option("--data", data_path, "input CSV file")->required();
    prepare->add_option("--out", out_path, "output directory for the encoded cache")->required();
    prepare->add_option("--seed", seed, "split seed");

    auto* sweep_cmd = app.add_subcommand("sweep", "Run a hyperparameter grid sweep");
    sweep_cmd->add_option("--data", data_path, "encoded dataset cache (.bin)")->required();
    sweep_cmd->add_option("--grid", grid_path, "grid specification JSON")->required();
    sweep_cmd->add_option("--out", out_path, "result store file (JSON lines)")->required();
    sweep_cmd->add_option("--seed", seed, "base seed");
    sweep_cmd->add_option("--parallelism", parallelism, "concurrent configs")
        ->check(CLI::PositiveNumber);
    sweep_cmd->add_option("--alpha", alpha, "CVaR level for recorded risk metrics");
    sweep_cmd->add_option("--epsilon", epsilon, "DORO level for recorded risk metrics");

    auto* analyze = app.add_subcommand("analyze", "Produce report CSVs from result stores");
    analyze
        ->add_option("analysis", analysis,
                     "one of: frontier, select, compare, sensitivity, correlations")
        ->required();
    analyze->add_option("--store", store_paths, "result store file(s)")->required();
    analyze->add_option("--out", out_path, "output directory for reports")->required();
    analyze->add_option("--rule", rule_name,
                        "selection rule: best_accuracy, best_worst_group, best_cvar, "
                        "best_doro_cvar");
    analyze->add_option("--split", split_name, "selection split: val or test");
    analyze->add_option("--alpha", alpha, "CVaR level (recorded in reports)");
    analyze->add_option("--epsilon", epsilon, "DORO level (recorded in reports)");
    analyze->add_option("--config-a", id_a, "first config id (compare)");
    analyze->add_option("--config-b", id_b, "second config id (compare)");
    analyze->add_option("--group", ci_group, "compare group: overall or worst");
    analyze->add_option("--grid", grid_path, "grid JSON for edge-of-grid warnings (frontier)");
    analyze->add_flag("--no-timestamp", no_timestamp, "omit the timestamp header line");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (prepare->parsed()) return cmd_prepare(schema_path, data_path, out_path, seed);
        if (sweep_cmd->parsed()) {
            sweep::MetricLevels levels;
            levels.alpha = alpha;
            levels.epsilon = epsilon;
            return cmd_sweep(data_path, grid_path, out_path, seed, parallelism, levels);
        }
        return cmd_analyze(analysis, store_paths, out_path, rule_name, alpha, epsilon, split_name,
                           id_a, id_b, ci_group, grid_path, no_timestamp);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
