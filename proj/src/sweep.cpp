#include "tabbench/sweep.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>

#include "tabbench/boosting.hpp"
#include "tabbench/forest.hpp"
#include "tabbench/linear.hpp"
#include "tabbench/mlp.hpp"
#include "tabbench/robust.hpp"

namespace tabbench::sweep {

namespace {

constexpr int kStoreVersion = 1;

std::map<std::string, std::vector<Json>> parse_value_lists(const Json& obj,
                                                           const std::string& what) {
    std::map<std::string, std::vector<Json>> out;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!it.value().is_array() || it.value().empty())
            throw ConfigError("grid: " + what + " '" + it.key() +
                              "' must be a nonempty array of values");
        out[it.key()] = std::vector<Json>(it.value().begin(), it.value().end());
    }
    return out;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex16(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

template <typename T>
T get_or(const Json& params, const char* key, T fallback) {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    return it->get<T>();
}

robust::Objective parse_objective(const Json& o) {
    robust::Objective obj;
    const std::string v = get_or<std::string>(o, "variant", "erm");
    if (v == "erm") obj.variant = robust::Variant::ERM;
    else if (v == "cvar") obj.variant = robust::Variant::CVaR;
    else if (v == "chi2") obj.variant = robust::Variant::Chi2;
    else if (v == "cvar_doro") obj.variant = robust::Variant::CVaRDoro;
    else if (v == "chi2_doro") obj.variant = robust::Variant::Chi2Doro;
    else if (v == "group_dro") obj.variant = robust::Variant::GroupDRO;
    else if (v == "mwld") obj.variant = robust::Variant::MWLD;
    else throw ConfigError("objective: unknown variant '" + v + "'");
    obj.alpha = get_or<double>(o, "alpha", obj.alpha);
    obj.epsilon = get_or<double>(o, "epsilon", obj.epsilon);
    obj.eta = get_or<double>(o, "eta", obj.eta);
    obj.lambda = get_or<double>(o, "lambda", obj.lambda);
    obj.validate();
    return obj;
}

struct SplitData {
    Matrix X;
    Array y;
    IntVector g;
};

SplitData take(const data::TabularDataset& ds, data::Split s) {
    const auto rows = ds.rows_in(s);
    return {ds.x_rows(rows), ds.y_rows(rows), ds.group_rows(rows)};
}

SplitMetrics eval_split(const Array& scores, const Array& labels, const IntVector& groups,
                        const MetricLevels& levels) {
    metrics::ScoredPredictions preds{scores, labels, groups};
    SplitMetrics sm;
    const auto acc = metrics::accuracy_report(preds);
    sm.accuracy = acc.overall;
    sm.worst_group_accuracy = acc.worst_group;
    sm.accuracy_disparity = acc.disparity;
    sm.group_accuracy = acc.per_group;
    sm.group_n = acc.group_n;
    sm.cross_entropy = metrics::cross_entropy(preds);
    const Array losses = metrics::bce_losses(scores, labels);
    sm.cvar_risk = metrics::cvar_risk(losses, levels.alpha);
    sm.doro_cvar_risk = metrics::doro_cvar_risk(losses, levels.alpha, levels.epsilon);
    sm.dp_diff = metrics::demographic_parity_diff(preds);
    sm.eo_diff = metrics::equalized_odds_diff(preds);
    return sm;
}

}  // namespace

GridSpec GridSpec::from_json(const Json& j) {
    GridSpec spec;
    if (!j.contains("family") || !j["family"].is_string())
        throw ConfigError("grid: missing 'family'");
    spec.family = j["family"].get<std::string>();
    if (!j.contains("params") || !j["params"].is_object())
        throw ConfigError("grid: missing 'params' object");
    spec.params = parse_value_lists(j["params"], "parameter");
    if (j.contains("objective")) {
        spec.objective_params = parse_value_lists(j["objective"], "objective parameter");
    }
    if (j.contains("epoch_overrides")) {
        for (auto it = j["epoch_overrides"].begin(); it != j["epoch_overrides"].end(); ++it) {
            spec.epoch_overrides[it.key()] = it.value().get<int>();
        }
    }
    return spec;
}

GridSpec GridSpec::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("grid: cannot open " + path);
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw ConfigError("grid: invalid JSON in " + path + ": " + e.what());
    }
    return from_json(j);
}

std::vector<Config> expand_grid(const GridSpec& spec) {
    if (spec.family.empty()) throw ConfigError("grid: empty family");
    // Combined ordered axis list: base params, then objective params; the
    // rightmost axis varies fastest.
    struct Axis {
        std::string name;
        bool is_objective;
        const std::vector<Json>* values;
    };
    std::vector<Axis> axes;
    for (const auto& [name, values] : spec.params) axes.push_back({name, false, &values});
    for (const auto& [name, values] : spec.objective_params) axes.push_back({name, true, &values});

    std::vector<Config> configs;
    std::vector<std::size_t> pos(axes.size(), 0);
    while (true) {
        Config c;
        c["family"] = spec.family;
        c["params"] = Json::object();
        for (std::size_t a = 0; a < axes.size(); ++a) {
            if (axes[a].is_objective) {
                c["objective"][axes[a].name] = (*axes[a].values)[pos[a]];
            } else {
                c["params"][axes[a].name] = (*axes[a].values)[pos[a]];
            }
        }
        configs.push_back(std::move(c));
        if (axes.empty()) break;
        std::size_t a = axes.size();
        while (a-- > 0) {
            if (++pos[a] < axes[a].values->size()) break;
            pos[a] = 0;
            if (a == 0) return configs;
        }
        if (pos == std::vector<std::size_t>(axes.size(), 0)) break;
    }
    return configs;
}

std::string config_id(const Config& config) { return hex16(fnv1a(config.dump())); }

Eigen::Index SplitMetrics::total_n() const {
    Eigen::Index n = 0;
    for (auto g : group_n) n += g;
    return n;
}

Eigen::Index SplitMetrics::smallest_group_n() const {
    Eigen::Index n = std::numeric_limits<Eigen::Index>::max();
    for (auto g : group_n) {
        if (g > 0) n = std::min(n, g);
    }
    return n == std::numeric_limits<Eigen::Index>::max() ? 0 : n;
}

bool SplitMetrics::all_finite() const {
    const double vals[] = {accuracy, worst_group_accuracy, accuracy_disparity, cross_entropy,
                           cvar_risk, doro_cvar_risk, dp_diff, eo_diff};
    for (double v : vals) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

namespace {

// Non-finite values (empty-group metrics) serialize as null and read back
// as NaN so records survive a round trip and compare equal.
Json num_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double num_or_nan(const Json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

Json split_to_json(const SplitMetrics& sm) {
    Json j;
    j["accuracy"] = sm.accuracy;
    j["worst_group_accuracy"] = sm.worst_group_accuracy;
    j["accuracy_disparity"] = sm.accuracy_disparity;
    j["cross_entropy"] = sm.cross_entropy;
    j["cvar_risk"] = sm.cvar_risk;
    j["doro_cvar_risk"] = sm.doro_cvar_risk;
    j["dp_diff"] = sm.dp_diff;
    j["eo_diff"] = sm.eo_diff;
    Json ga = Json::array();
    for (double v : sm.group_accuracy) ga.push_back(num_or_null(v));
    j["group_accuracy"] = ga;
    j["group_n"] = sm.group_n;
    return j;
}

SplitMetrics split_from_json(const Json& j) {
    SplitMetrics sm;
    sm.accuracy = j.at("accuracy").get<double>();
    sm.worst_group_accuracy = j.at("worst_group_accuracy").get<double>();
    sm.accuracy_disparity = j.at("accuracy_disparity").get<double>();
    sm.cross_entropy = j.at("cross_entropy").get<double>();
    sm.cvar_risk = j.at("cvar_risk").get<double>();
    sm.doro_cvar_risk = j.at("doro_cvar_risk").get<double>();
    sm.dp_diff = j.at("dp_diff").get<double>();
    sm.eo_diff = j.at("eo_diff").get<double>();
    for (int g = 0; g < kNumGroups; ++g) {
        sm.group_accuracy[static_cast<std::size_t>(g)] =
            num_or_nan(j.at("group_accuracy")[static_cast<std::size_t>(g)]);
        sm.group_n[static_cast<std::size_t>(g)] =
            j.at("group_n")[static_cast<std::size_t>(g)].get<Eigen::Index>();
    }
    return sm;
}

}  // namespace

Json RunRecord::to_json() const {
    Json j;
    j["dataset"] = dataset;
    j["config_id"] = id;
    j["config"] = config;
    j["seed"] = seed;
    j["wall_seconds"] = wall_seconds;
    j["status"] = status;
    if (!error.empty()) j["error"] = error;
    if (status == "ok") {
        j["val"] = split_to_json(val);
        j["test"] = split_to_json(test);
    }
    return j;
}

RunRecord RunRecord::from_json(const Json& j) {
    RunRecord r;
    r.dataset = j.at("dataset").get<std::string>();
    r.id = j.at("config_id").get<std::string>();
    r.config = j.at("config");
    r.seed = j.at("seed").get<std::uint64_t>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    r.status = j.at("status").get<std::string>();
    if (j.contains("error")) r.error = j.at("error").get<std::string>();
    if (r.status == "ok") {
        r.val = split_from_json(j.at("val"));
        r.test = split_from_json(j.at("test"));
    }
    return r;
}

RunRecord run_config(const Config& config, const data::TabularDataset& ds, std::uint64_t base_seed,
                     const MetricLevels& levels) {
    RunRecord record;
    record.dataset = ds.name;
    record.config = config;
    record.id = config_id(config);
    record.seed = mix_seed(base_seed, fnv1a(config.dump()));

    const auto start = std::chrono::steady_clock::now();
    try {
        const std::string family = config.at("family").get<std::string>();
        const Json& p = config.at("params");
        const SplitData train = take(ds, data::Split::Train);
        const SplitData val = take(ds, data::Split::Val);
        const SplitData test = take(ds, data::Split::Test);

        Array val_scores, test_scores;
        if (family == "boosted") {
            boosting::BoostParams bp;
            bp.learning_rate = get_or<double>(p, "learning_rate", bp.learning_rate);
            bp.n_estimators = get_or<int>(p, "n_estimators", bp.n_estimators);
            bp.max_depth = get_or<int>(p, "max_depth", bp.max_depth);
            bp.min_split_loss = get_or<double>(p, "min_split_loss", bp.min_split_loss);
            bp.col_subsample_tree = get_or<double>(p, "col_subsample_tree", bp.col_subsample_tree);
            bp.col_subsample_level =
                get_or<double>(p, "col_subsample_level", bp.col_subsample_level);
            bp.max_bins = get_or<int>(p, "max_bins", bp.max_bins);
            bp.max_leaves = get_or<int>(p, "max_leaves", bp.max_leaves);
            bp.min_samples_split =
                get_or<Eigen::Index>(p, "min_samples_split", bp.min_samples_split);
            bp.min_samples_leaf = get_or<Eigen::Index>(p, "min_samples_leaf", bp.min_samples_leaf);
            const std::string order = get_or<std::string>(p, "order", "first");
            if (order == "first") bp.order = boosting::Order::First;
            else if (order == "second") bp.order = boosting::Order::Second;
            else throw ConfigError("boosted: unknown order '" + order + "'");
            const std::string growth = get_or<std::string>(p, "growth", "depthwise");
            if (growth == "depthwise") bp.growth = boosting::Growth::Depthwise;
            else if (growth == "loss_guide") bp.growth = boosting::Growth::LossGuide;
            else throw ConfigError("boosted: unknown growth '" + growth + "'");
            bp.seed = record.seed;
            const auto model = boosting::fit_boosted(train.X, train.y, bp);
            val_scores = model.predict(val.X);
            test_scores = model.predict(test.X);
        } else if (family == "forest") {
            forest::ForestParams fp;
            fp.n_estimators = get_or<int>(p, "n_estimators", fp.n_estimators);
            fp.min_samples_split =
                get_or<Eigen::Index>(p, "min_samples_split", fp.min_samples_split);
            fp.min_samples_leaf = get_or<Eigen::Index>(p, "min_samples_leaf", fp.min_samples_leaf);
            fp.ccp_alpha = get_or<double>(p, "ccp_alpha", fp.ccp_alpha);
            const std::string mf = get_or<std::string>(p, "max_features", "sqrt");
            if (mf == "sqrt") fp.max_features = tree::MaxFeatures::Sqrt;
            else if (mf == "log2") fp.max_features = tree::MaxFeatures::Log2;
            else if (mf == "all") fp.max_features = tree::MaxFeatures::All;
            else throw ConfigError("forest: unknown max_features '" + mf + "'");
            fp.seed = record.seed;
            const auto model = forest::fit_forest(train.X, train.y, fp);
            val_scores = model.predict(val.X);
            test_scores = model.predict(test.X);
        } else if (family == "linear") {
            linear::LinearParams lp;
            const std::string kind = get_or<std::string>(p, "kind", "logistic");
            if (kind == "logistic") lp.kind = linear::LinearKind::Logistic;
            else if (kind == "squared_hinge") lp.kind = linear::LinearKind::SquaredHinge;
            else throw ConfigError("linear: unknown kind '" + kind + "'");
            lp.l2_c = get_or<double>(p, "l2_c", lp.l2_c);
            lp.lr = get_or<double>(p, "lr", lp.lr);
            lp.iters = get_or<int>(p, "iters", lp.iters);
            lp.tol = get_or<double>(p, "tol", lp.tol);
            lp.use_rff = get_or<bool>(p, "use_rff", lp.use_rff);
            lp.gamma = get_or<double>(p, "gamma", lp.gamma);
            lp.n_components = get_or<int>(p, "n_components", lp.n_components);
            lp.seed = record.seed;
            const auto model = linear::fit_linear(train.X, train.y, lp);
            val_scores = model.predict(val.X);
            test_scores = model.predict(test.X);
        } else if (family == "mlp") {
            mlp::MlpParams mp;
            mp.num_layers = get_or<int>(p, "num_layers", mp.num_layers);
            mp.hidden_units = get_or<int>(p, "hidden_units", mp.hidden_units);
            mp.lr = get_or<double>(p, "lr", mp.lr);
            mp.weight_decay = get_or<double>(p, "weight_decay", mp.weight_decay);
            mp.momentum = get_or<double>(p, "momentum", mp.momentum);
            mp.epochs = get_or<int>(p, "epochs", mp.epochs);
            mp.batch_size = get_or<Eigen::Index>(p, "batch_size", mp.batch_size);
            mp.seed = record.seed;
            robust::Objective objective;
            if (config.contains("objective")) {
                objective = parse_objective(config["objective"]);
                // The MWLD grid carries its own L2 strength.
                if (config["objective"].contains("l2"))
                    mp.weight_decay = config["objective"]["l2"].get<double>();
            }
            const auto model = mlp::fit_mlp(train.X, train.y, train.g, val.X, val.y, val.g, mp,
                                            objective);
            val_scores = model.predict(val.X);
            test_scores = model.predict(test.X);
        } else {
            throw ConfigError("unknown learner family '" + family + "'");
        }

        record.val = eval_split(val_scores, val.y, val.g, levels);
        record.test = eval_split(test_scores, test.y, test.g, levels);
        if (!record.val.all_finite() || !record.test.all_finite())
            throw FitError("non-finite evaluation metric");
        record.status = "ok";
    } catch (const std::exception& e) {
        record.status = "failed";
        record.error = e.what();
    }
    const auto end = std::chrono::steady_clock::now();
    record.wall_seconds = std::chrono::duration<double>(end - start).count();
    return record;
}

ResultStore::ResultStore(std::string path) : path_(std::move(path)) {}

void ResultStore::append(const RunRecord& record) {
    bool need_header = false;
    {
        std::ifstream probe(path_);
        need_header = !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
    }
    std::ofstream out(path_, std::ios::app);
    if (!out) throw DataError("result store: cannot write " + path_);
    if (need_header) {
        Json header;
        header["format"] = "tabbench-results";
        header["version"] = kStoreVersion;
        out << header.dump() << "\n";
    }
    out << record.to_json().dump() << "\n";
    if (!out) throw DataError("result store: write failed for " + path_);
}

std::vector<RunRecord> ResultStore::load() const {
    std::ifstream in(path_);
    if (!in) throw DataError("result store: cannot open " + path_);
    std::string line;
    if (!std::getline(in, line)) return {};
    Json header = Json::parse(line, nullptr, false);
    if (header.is_discarded() || header.value("format", "") != "tabbench-results")
        throw DataError("result store: missing or invalid header in " + path_);
    if (header.value("version", 0) != kStoreVersion)
        throw DataError("result store: unsupported version in " + path_);
    std::vector<RunRecord> records;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(RunRecord::from_json(Json::parse(line)));
    }
    return records;
}

std::set<std::string> ResultStore::recorded_ids() const {
    std::set<std::string> ids;
    std::ifstream in(path_);
    if (!in) return ids;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            continue;
        }
        if (line.empty()) continue;
        Json j = Json::parse(line, nullptr, false);
        if (!j.is_discarded() && j.contains("config_id"))
            ids.insert(j["config_id"].get<std::string>());
    }
    return ids;
}

SweepTally run_sweep(const std::vector<Config>& configs, const data::TabularDataset& ds,
                     int parallelism, std::uint64_t base_seed, ResultStore& store,
                     const MetricLevels& levels,
                     const std::function<void(const RunRecord&)>& on_record) {
    if (parallelism < 1) throw ConfigError("run_sweep: parallelism must be positive");
    SweepTally tally;
    const auto done = store.recorded_ids();
    std::vector<const Config*> pending;
    for (const auto& c : configs) {
        if (done.count(config_id(c))) {
            ++tally.skipped;
        } else {
            pending.push_back(&c);
        }
    }

    std::atomic<std::size_t> next{0};
    std::mutex write_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= pending.size()) return;
            RunRecord record = run_config(*pending[i], ds, base_seed, levels);
            std::lock_guard<std::mutex> lock(write_mutex);
            store.append(record);
            if (record.status == "ok") ++tally.ok;
            else ++tally.failed;
            if (on_record) on_record(record);
        }
    };

    if (parallelism == 1 || pending.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        const int n_threads = std::min<int>(parallelism, static_cast<int>(pending.size()));
        threads.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return tally;
}

namespace {

double rule_metric(const RunRecord& r, const SelectionRule& rule, bool* lower_is_better) {
    const SplitMetrics& sm = rule.split == data::Split::Test ? r.test : r.val;
    switch (rule.kind) {
        case RuleKind::BestAccuracy:
            *lower_is_better = false;
            return sm.accuracy;
        case RuleKind::BestWorstGroup:
            *lower_is_better = false;
            return sm.worst_group_accuracy;
        case RuleKind::BestCVaR:
            *lower_is_better = true;
            return sm.cvar_risk;
        case RuleKind::BestDoroCVaR:
            *lower_is_better = true;
            return sm.doro_cvar_risk;
    }
    throw ConfigError("select: unknown rule");
}

}  // namespace

std::string select(const std::vector<RunRecord>& records, const SelectionRule& rule) {
    if (rule.split == data::Split::Train) throw ConfigError("select: train split not allowed");
    const RunRecord* best = nullptr;
    double best_value = 0.0;
    for (const auto& r : records) {
        if (r.status != "ok") continue;
        bool lower = false;
        const double v = rule_metric(r, rule, &lower);
        if (!best) {
            best = &r;
            best_value = v;
            continue;
        }
        const bool better = lower ? v < best_value : v > best_value;
        const bool tied = v == best_value;
        if (better || (tied && r.id < best->id)) {
            best = &r;
            best_value = v;
        }
    }
    if (!best) throw SelectionError("select: no ok records");
    return best->id;
}

CiComparison compare_ci(const RunRecord& a, const RunRecord& b, CiGroup group) {
    auto interval = [&](const RunRecord& r) {
        const SplitMetrics& sm = r.test;
        long n = 0;
        double acc = 0.0;
        if (group == CiGroup::Overall) {
            n = static_cast<long>(sm.total_n());
            acc = sm.accuracy;
        } else {
            n = static_cast<long>(sm.smallest_group_n());
            acc = sm.worst_group_accuracy;
        }
        if (n <= 0) throw DataError("compare_ci: zero sample size");
        const long k = std::lround(acc * static_cast<double>(n));
        return metrics::clopper_pearson(std::min(std::max(k, 0L), n), n, 0.95);
    };
    CiComparison out;
    out.interval_a = interval(a);
    out.interval_b = interval(b);
    out.significant = out.interval_a.upper < out.interval_b.lower ||
                      out.interval_b.upper < out.interval_a.lower;
    return out;
}

namespace {

// Flatten a config to comparable hyperparameter axes.
std::map<std::string, Json> flat_params(const Config& c) {
    std::map<std::string, Json> out;
    if (c.contains("params")) {
        for (auto it = c["params"].begin(); it != c["params"].end(); ++it) out[it.key()] = it.value();
    }
    if (c.contains("objective")) {
        for (auto it = c["objective"].begin(); it != c["objective"].end(); ++it)
            out["objective." + it.key()] = it.value();
    }
    return out;
}

double ci_width_for(const RunRecord& r, const SelectionRule& rule) {
    const SplitMetrics& sm = rule.split == data::Split::Test ? r.test : r.val;
    long n = 0;
    double acc = 0.0;
    if (rule.kind == RuleKind::BestAccuracy) {
        n = static_cast<long>(sm.total_n());
        acc = sm.accuracy;
    } else if (rule.kind == RuleKind::BestWorstGroup) {
        n = static_cast<long>(sm.smallest_group_n());
        acc = sm.worst_group_accuracy;
    } else {
        return 0.0;  // risk metrics are not binomial proportions
    }
    if (n <= 0) return 0.0;
    const long k = std::min(std::max(std::lround(acc * static_cast<double>(n)), 0L), n);
    const auto ci = metrics::clopper_pearson(k, n, 0.95);
    return ci.upper - ci.lower;
}

}  // namespace

SensitivityResult sensitivity(const std::map<std::string, std::vector<RunRecord>>& by_dataset,
                              const SelectionRule& rule) {
    if (by_dataset.size() < 2) throw DataError("sensitivity: need records for at least 2 datasets");
    // The per-dataset winner under the rule.
    std::map<std::string, const RunRecord*> winners;
    for (const auto& [name, records] : by_dataset) {
        bool any_ok = false;
        for (const auto& r : records) any_ok |= r.status == "ok";
        if (records.empty() || !any_ok)
            throw DataError("sensitivity: no usable records for dataset '" + name + "'");
        const std::string id = select(records, rule);
        for (const auto& r : records) {
            if (r.id == id) winners[name] = &r;
        }
    }

    // Collect the winning value of every hyperparameter axis.
    std::map<std::string, std::vector<Json>> collected;
    for (const auto& [name, rec] : winners) {
        for (const auto& [param, value] : flat_params(rec->config)) {
            collected[param].push_back(value);
        }
    }

    SensitivityResult result;
    auto passes = [&](const Config& c) {
        const auto params = flat_params(c);
        for (const auto& [param, values] : collected) {
            auto it = params.find(param);
            if (it == params.end()) return false;
            const bool numeric = values.front().is_number();
            if (numeric && it->second.is_number()) {
                double lo = std::numeric_limits<double>::infinity(), hi = -lo;
                for (const auto& v : values) {
                    lo = std::min(lo, v.get<double>());
                    hi = std::max(hi, v.get<double>());
                }
                const double x = it->second.get<double>();
                if (x < lo || x > hi) return false;
            } else {
                bool found = false;
                for (const auto& v : values) found |= v == it->second;
                if (!found) return false;
            }
        }
        return true;
    };

    for (const auto& [param, values] : collected) {
        if (values.front().is_number()) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (const auto& v : values) {
                lo = std::min(lo, v.get<double>());
                hi = std::max(hi, v.get<double>());
            }
            result.kept_ranges[param] = Json{{"min", lo}, {"max", hi}};
        } else {
            Json kept = Json::array();
            std::set<std::string> seen;
            for (const auto& v : values) {
                if (seen.insert(v.dump()).second) kept.push_back(v);
            }
            result.kept_ranges[param] = kept;
        }
    }

    for (const auto& [name, records] : by_dataset) {
        std::vector<const RunRecord*> survivors;
        for (const auto& r : records) {
            if (r.status == "ok" && passes(r.config)) survivors.push_back(&r);
        }
        std::sort(survivors.begin(), survivors.end(),
                  [&](const RunRecord* a, const RunRecord* b) {
                      bool lower = false;
                      const double va = rule_metric(*a, rule, &lower);
                      const double vb = rule_metric(*b, rule, &lower);
                      if (va != vb) return lower ? va < vb : va > vb;
                      return a->id < b->id;
                  });
        std::vector<SensitivityPoint> series;
        int rank = 1;
        for (const auto* r : survivors) {
            bool lower = false;
            series.push_back({rank++, r->id, rule_metric(*r, rule, &lower), ci_width_for(*r, rule)});
        }
        result.series[name] = std::move(series);
    }
    return result;
}

std::vector<FrontierRow> frontier_report(const std::vector<RunRecord>& records, data::Split split) {
    std::vector<FrontierRow> rows;
    std::vector<frontier::PerfPoint> points;
    std::vector<std::size_t> row_of_point;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.status != "ok") continue;
        const SplitMetrics& sm = split == data::Split::Test ? r.test : r.val;
        rows.push_back({r.id, sm.accuracy, sm.worst_group_accuracy, false});
        points.push_back({sm.accuracy, sm.worst_group_accuracy, rows.size() - 1});
        row_of_point.push_back(rows.size() - 1);
    }
    if (points.empty()) return rows;
    const auto curve = frontier::compute_frontier(points, frontier::Orientation::MaxMax);
    for (auto pi : curve.indices) {
        // Mark every record sharing the frontier point's coordinates.
        for (auto& row : rows) {
            if (row.m1 == points[pi].m1 && row.m2 == points[pi].m2) row.on_frontier = true;
        }
    }
    return rows;
}

CorrelationReport correlations(const std::vector<RunRecord>& records, data::Split split) {
    CorrelationReport report;
    report.metric_names = {"accuracy",      "worst_group_accuracy", "accuracy_disparity",
                           "cross_entropy", "cvar_risk",            "doro_cvar_risk",
                           "dp_diff",       "eo_diff"};
    std::vector<const RunRecord*> ok;
    for (const auto& r : records) {
        if (r.status == "ok") ok.push_back(&r);
    }
    const auto n = static_cast<Eigen::Index>(ok.size());
    if (n < 2) throw DataError("correlations: need at least 2 ok records");
    Matrix values(n, 8);
    for (Eigen::Index i = 0; i < n; ++i) {
        const SplitMetrics& sm = split == data::Split::Test ? ok[static_cast<std::size_t>(i)]->test
                                                            : ok[static_cast<std::size_t>(i)]->val;
        values.row(i) << sm.accuracy, sm.worst_group_accuracy, sm.accuracy_disparity,
            sm.cross_entropy, sm.cvar_risk, sm.doro_cvar_risk, sm.dp_diff, sm.eo_diff;
    }
    report.r.resize(8, 8);
    for (int a = 0; a < 8; ++a) {
        for (int b = 0; b < 8; ++b) {
            report.r(a, b) = metrics::pearson_r(values.col(a).array(), values.col(b).array());
        }
    }
    return report;
}

}  // namespace tabbench::sweep
