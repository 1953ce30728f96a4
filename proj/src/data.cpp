#include "tabbench/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tabbench::data {

using nlohmann::json;

void DatasetSchema::validate() const {
    if (sensitive.size() != 2) throw ConfigError("schema: exactly two sensitive attributes required");
    for (const auto& c : columns) {
        if (c.name == target)
            throw ConfigError("schema: target column '" + target + "' listed among features");
    }
    if (target.empty()) throw ConfigError("schema: target column missing");
}

DatasetSchema DatasetSchema::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("schema file not found: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("schema parse error in " + path + ": " + e.what());
    }
    DatasetSchema s;
    s.name = j.at("name").get<std::string>();
    s.target = j.at("target").get<std::string>();
    s.positive_value = j.at("positive_value").get<std::string>();
    for (const auto& sv : j.at("sensitive")) {
        const auto spec = sv.get<std::string>();
        const auto pos = spec.find(':');
        if (pos == std::string::npos)
            throw ConfigError("schema: sensitive entry must be 'column:value', got " + spec);
        s.sensitive.push_back({spec.substr(0, pos), spec.substr(pos + 1)});
    }
    for (const auto& cv : j.at("columns")) {
        ColumnSpec c;
        c.name = cv.at("name").get<std::string>();
        const auto kind = cv.at("kind").get<std::string>();
        if (kind == "numeric") {
            c.kind = ColumnKind::Numeric;
        } else if (kind == "categorical") {
            c.kind = ColumnKind::Categorical;
        } else if (kind == "binary") {
            c.kind = ColumnKind::Binary;
        } else {
            throw ConfigError("schema: unknown column kind '" + kind + "'");
        }
        s.columns.push_back(std::move(c));
    }
    if (j.contains("split_column")) s.split_column = j["split_column"].get<std::string>();
    if (j.contains("missing_values"))
        s.missing_values = j["missing_values"].get<std::vector<std::string>>();
    s.validate();
    return s;
}

const std::vector<std::string>& RawTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < column_names.size(); ++i)
        if (column_names[i] == name) return columns[i];
    throw ConfigError("column not in table: " + name);
}

bool RawTable::has_column(const std::string& name) const {
    return std::find(column_names.begin(), column_names.end(), name) != column_names.end();
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

}  // namespace

RawTable load_csv(const std::string& path, const DatasetSchema& schema) {
    schema.validate();
    std::ifstream in(path);
    if (!in) throw DataError("csv file not found: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty csv file: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();

    RawTable table;
    table.column_names = split_csv_line(line);
    table.columns.resize(table.column_names.size());

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != table.column_names.size())
            throw DataError("csv row " + std::to_string(table.n_rows + 2) + " has " +
                            std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(table.column_names.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) table.columns[c].push_back(std::move(cells[c]));
        ++table.n_rows;
    }
    if (table.n_rows == 0) throw DataError("csv has a header but no rows: " + path);

    auto require = [&](const std::string& name) {
        if (!table.has_column(name)) throw ConfigError("schema column missing from csv: " + name);
    };
    for (const auto& c : schema.columns) require(c.name);
    require(schema.target);
    for (const auto& s : schema.sensitive) require(s.column);
    if (schema.split_column) require(*schema.split_column);
    return table;
}

void SplitSpec::validate() const {
    if (train <= 0.0 || val <= 0.0 || test <= 0.0)
        throw ConfigError("split fractions must be positive");
    if (std::fabs(train + val + test - 1.0) > 1e-9)
        throw ConfigError("split fractions must sum to 1");
}

std::vector<Split> assign_splits(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    if (spec.mode == SplitSpec::Mode::Random && n < 10)
        throw DataError("random split needs at least 10 rows");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(spec.seed);
    std::shuffle(order.begin(), order.end(), rng);

    const auto n_train = static_cast<std::size_t>(std::llround(spec.train * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(n)));
    std::vector<Split> tags(n, Split::Test);
    for (std::size_t i = 0; i < n; ++i) {
        if (i < n_train) {
            tags[order[i]] = Split::Train;
        } else if (i < n_train + n_val) {
            tags[order[i]] = Split::Val;
        }
    }
    return tags;
}

namespace {

bool is_missing(const DatasetSchema& schema, const std::string& cell) {
    return std::find(schema.missing_values.begin(), schema.missing_values.end(), cell) !=
           schema.missing_values.end();
}

std::optional<double> parse_num(const std::string& cell) {
    if (cell.empty()) return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0' || !std::isfinite(v)) return std::nullopt;
    return v;
}

// Predefined split columns may carry only {train, test}; the requested val
// share is then carved out of the test rows by a seeded even split.
std::vector<Split> splits_from_column(const std::vector<std::string>& col, const SplitSpec& spec) {
    std::vector<Split> tags(col.size());
    bool has_val = false;
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 0; i < col.size(); ++i) {
        const std::string v = col[i];
        if (v == "train") {
            tags[i] = Split::Train;
        } else if (v == "val" || v == "validation") {
            tags[i] = Split::Val;
            has_val = true;
        } else if (v == "test") {
            tags[i] = Split::Test;
            test_rows.push_back(i);
        } else {
            throw DataError("unknown split label '" + v + "' at row " + std::to_string(i));
        }
    }
    if (!has_val && !test_rows.empty()) {
        std::mt19937_64 rng(spec.seed);
        std::shuffle(test_rows.begin(), test_rows.end(), rng);
        for (std::size_t i = 0; i < test_rows.size() / 2; ++i) tags[test_rows[i]] = Split::Val;
    }
    return tags;
}

}  // namespace

TabularDataset encode(const RawTable& raw, const DatasetSchema& schema, const SplitSpec& spec) {
    schema.validate();
    const std::size_t n = raw.n_rows;

    std::vector<Split> tags;
    if (spec.mode == SplitSpec::Mode::PredefinedColumn) {
        if (!schema.split_column) throw ConfigError("predefined split requested but schema has no split_column");
        tags = splits_from_column(raw.column(*schema.split_column), spec);
    } else {
        tags = assign_splits(n, spec);
    }

    TabularDataset ds;
    ds.name = schema.name;
    ds.split = tags;

    // Labels and groups.
    ds.y.resize(static_cast<Eigen::Index>(n));
    const auto& target_col = raw.column(schema.target);
    for (std::size_t i = 0; i < n; ++i) ds.y(static_cast<Eigen::Index>(i)) = target_col[i] == schema.positive_value ? 1.0 : 0.0;

    ds.group_id.resize(static_cast<Eigen::Index>(n));
    const auto& a1col = raw.column(schema.sensitive[0].column);
    const auto& a2col = raw.column(schema.sensitive[1].column);
    for (std::size_t i = 0; i < n; ++i) {
        const int a1 = a1col[i] == schema.sensitive[0].positive_value ? 1 : 0;
        const int a2 = a2col[i] == schema.sensitive[1].positive_value ? 1 : 0;
        ds.group_id(static_cast<Eigen::Index>(i)) = 2 * a1 + a2;
    }
    {
        std::array<std::size_t, kNumGroups> train_counts{};
        for (std::size_t i = 0; i < n; ++i)
            if (tags[i] == Split::Train) ++train_counts[static_cast<std::size_t>(ds.group_id(static_cast<Eigen::Index>(i)))];
        for (int g = 0; g < kNumGroups; ++g)
            if (train_counts[static_cast<std::size_t>(g)] == 0)
                throw DataError("degenerate dataset: subgroup " + std::to_string(g) + " empty in train split");
    }

    // Fit the encoder on the train split.
    Encoder& enc = ds.encoder;
    enc.columns = schema.columns;
    for (const auto& col : schema.columns) {
        const auto& cells = raw.column(col.name);
        if (col.kind == ColumnKind::Numeric || col.kind == ColumnKind::Binary) {
            std::vector<double> train_vals;
            for (std::size_t i = 0; i < n; ++i) {
                if (tags[i] != Split::Train || is_missing(schema, cells[i])) continue;
                if (auto v = parse_num(cells[i])) train_vals.push_back(*v);
            }
            if (train_vals.empty())
                throw DataError("numeric column '" + col.name + "' has no parseable train values");
            NumericEncoder ne;
            const double dn = static_cast<double>(train_vals.size());
            ne.mean = std::accumulate(train_vals.begin(), train_vals.end(), 0.0) / dn;
            double ss = 0.0;
            for (double v : train_vals) ss += (v - ne.mean) * (v - ne.mean);
            ne.std = std::sqrt(ss / dn);
            std::sort(train_vals.begin(), train_vals.end());
            const std::size_t m = train_vals.size();
            ne.median = m % 2 == 1 ? train_vals[m / 2]
                                   : 0.5 * (train_vals[m / 2 - 1] + train_vals[m / 2]);
            if (col.kind == ColumnKind::Binary) {
                // kept on its 0/1 scale
                ne.mean = 0.0;
                ne.std = 1.0;
            }
            enc.numeric[col.name] = ne;
            enc.feature_names.push_back(col.name);
        } else {
            std::set<std::string> vocab;
            for (std::size_t i = 0; i < n; ++i)
                if (tags[i] == Split::Train && !is_missing(schema, cells[i])) vocab.insert(cells[i]);
            CategoricalEncoder ce;
            ce.vocabulary.assign(vocab.begin(), vocab.end());
            for (const auto& v : ce.vocabulary) enc.feature_names.push_back(col.name + "=" + v);
            enc.feature_names.push_back(col.name + "=<missing>");
            enc.feature_names.push_back(col.name + "=<unseen>");
            enc.categorical[col.name] = std::move(ce);
        }
    }
    enc.width = static_cast<Eigen::Index>(enc.feature_names.size());

    // Transform all rows.
    ds.X = Matrix::Zero(static_cast<Eigen::Index>(n), enc.width);
    Eigen::Index col_off = 0;
    for (const auto& col : schema.columns) {
        const auto& cells = raw.column(col.name);
        if (col.kind == ColumnKind::Numeric || col.kind == ColumnKind::Binary) {
            const auto& ne = enc.numeric.at(col.name);
            for (std::size_t i = 0; i < n; ++i) {
                double v;
                if (is_missing(schema, cells[i])) {
                    v = ne.median;
                } else if (auto p = parse_num(cells[i])) {
                    v = *p;
                } else {
                    v = ne.median;  // unparseable numeric cell treated as missing
                }
                const auto r = static_cast<Eigen::Index>(i);
                ds.X(r, col_off) = ne.std > 0.0 ? (v - ne.mean) / ne.std : 0.0;
            }
            ++col_off;
        } else {
            const auto& ce = enc.categorical.at(col.name);
            const auto vsize = static_cast<Eigen::Index>(ce.vocabulary.size());
            for (std::size_t i = 0; i < n; ++i) {
                const auto r = static_cast<Eigen::Index>(i);
                if (is_missing(schema, cells[i])) {
                    ds.X(r, col_off + vsize) = 1.0;  // missing bucket
                    continue;
                }
                const auto it =
                    std::lower_bound(ce.vocabulary.begin(), ce.vocabulary.end(), cells[i]);
                if (it != ce.vocabulary.end() && *it == cells[i]) {
                    ds.X(r, col_off + static_cast<Eigen::Index>(it - ce.vocabulary.begin())) = 1.0;
                } else {
                    ds.X(r, col_off + vsize + 1) = 1.0;  // unseen bucket
                }
            }
            col_off += vsize + 2;
        }
    }
    return ds;
}

std::vector<Eigen::Index> TabularDataset::rows_in(Split s) const {
    std::vector<Eigen::Index> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(static_cast<Eigen::Index>(i));
    return out;
}

Matrix TabularDataset::x_rows(const std::vector<Eigen::Index>& rows) const {
    Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = X.row(rows[static_cast<std::size_t>(i)]);
    return out;
}

Array TabularDataset::y_rows(const std::vector<Eigen::Index>& rows) const {
    Array out(static_cast<Eigen::Index>(rows.size()));
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = y(rows[static_cast<std::size_t>(i)]);
    return out;
}

IntVector TabularDataset::group_rows(const std::vector<Eigen::Index>& rows) const {
    IntVector out(static_cast<Eigen::Index>(rows.size()));
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = group_id(rows[static_cast<std::size_t>(i)]);
    return out;
}

namespace {

constexpr std::uint32_t kCacheMagic = 0x54424453;  // "TBDS"
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("dataset cache truncated");
    return v;
}

void put_str(std::ostream& os, const std::string& s) {
    put<std::uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& is) {
    const auto len = get<std::uint64_t>(is);
    std::string s(len, '\0');
    is.read(s.data(), static_cast<std::streamsize>(len));
    if (!is) throw DataError("dataset cache truncated");
    return s;
}

}  // namespace

void TabularDataset::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write dataset cache: " + path);
    put(os, kCacheMagic);
    put(os, kCacheVersion);
    put_str(os, name);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(n()));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(d()));
    os.write(reinterpret_cast<const char*>(X.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(X.size())));
    os.write(reinterpret_cast<const char*>(y.data()),
             static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(y.size())));
    os.write(reinterpret_cast<const char*>(group_id.data()),
             static_cast<std::streamsize>(sizeof(int) * static_cast<std::size_t>(group_id.size())));
    for (auto s : split) put<std::uint8_t>(os, static_cast<std::uint8_t>(s));
    put<std::uint64_t>(os, encoder.feature_names.size());
    for (const auto& f : encoder.feature_names) put_str(os, f);
}

TabularDataset TabularDataset::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("dataset cache not found: " + path);
    if (get<std::uint32_t>(is) != kCacheMagic) throw DataError("not a dataset cache: " + path);
    if (get<std::uint32_t>(is) != kCacheVersion) throw DataError("dataset cache version mismatch");
    TabularDataset ds;
    ds.name = get_str(is);
    const auto n = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    const auto d = static_cast<Eigen::Index>(get<std::uint64_t>(is));
    ds.X.resize(n, d);
    is.read(reinterpret_cast<char*>(ds.X.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(n * d)));
    ds.y.resize(n);
    is.read(reinterpret_cast<char*>(ds.y.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(n)));
    ds.group_id.resize(n);
    is.read(reinterpret_cast<char*>(ds.group_id.data()),
            static_cast<std::streamsize>(sizeof(int) * static_cast<std::size_t>(n)));
    ds.split.resize(static_cast<std::size_t>(n));
    for (auto& s : ds.split) s = static_cast<Split>(get<std::uint8_t>(is));
    const auto nf = get<std::uint64_t>(is);
    for (std::uint64_t i = 0; i < nf; ++i) ds.encoder.feature_names.push_back(get_str(is));
    ds.encoder.width = static_cast<Eigen::Index>(nf);
    if (!is) throw DataError("dataset cache truncated");
    return ds;
}

}  // namespace tabbench::data
