#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tabbench/common.hpp"

namespace tabbench::data {

enum class ColumnKind { Numeric, Categorical, Binary };

struct ColumnSpec {
    std::string name;
    ColumnKind kind;
};

// A sensitive attribute: the named column maps to 1 when the cell equals
// `positive_value`.
struct SensitiveSpec {
    std::string column;
    std::string positive_value;
};

struct DatasetSchema {
    std::string name;
    std::string target;
    std::string positive_value;
    std::vector<SensitiveSpec> sensitive;  // exactly two
    std::vector<ColumnSpec> columns;       // feature columns
    std::optional<std::string> split_column;
    std::vector<std::string> missing_values{"", "?", "NA"};

    void validate() const;
    static DatasetSchema from_json_file(const std::string& path);
};

// Raw string cells, column-major, straight off the CSV.
struct RawTable {
    std::vector<std::string> column_names;
    std::vector<std::vector<std::string>> columns;
    std::size_t n_rows = 0;

    const std::vector<std::string>& column(const std::string& name) const;
    bool has_column(const std::string& name) const;
};

RawTable load_csv(const std::string& path, const DatasetSchema& schema);

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

struct SplitSpec {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
    std::uint64_t seed = 0;
    enum class Mode { Random, PredefinedColumn } mode = Mode::Random;

    void validate() const;
};

std::vector<Split> assign_splits(std::size_t n, const SplitSpec& spec);

// Per-column state fitted on the train split.
struct NumericEncoder {
    double mean = 0.0;
    double std = 0.0;  // 0 marks a constant column, encoded as all-zero
    double median = 0.0;
};

struct CategoricalEncoder {
    std::vector<std::string> vocabulary;  // sorted train categories
    // output width = vocabulary.size() + 2 (missing bucket, unseen bucket)
};

struct Encoder {
    std::vector<ColumnSpec> columns;
    std::map<std::string, NumericEncoder> numeric;
    std::map<std::string, CategoricalEncoder> categorical;
    std::vector<std::string> feature_names;
    Eigen::Index width = 0;
};

struct TabularDataset {
    std::string name;
    Matrix X;
    Array y;
    IntVector group_id;
    std::vector<Split> split;
    Encoder encoder;

    Eigen::Index n() const { return X.rows(); }
    Eigen::Index d() const { return X.cols(); }

    std::vector<Eigen::Index> rows_in(Split s) const;
    Matrix x_rows(const std::vector<Eigen::Index>& rows) const;
    Array y_rows(const std::vector<Eigen::Index>& rows) const;
    IntVector group_rows(const std::vector<Eigen::Index>& rows) const;

    // Binary cache; the layout is internal and versioned, not a
    // compatibility surface.
    void save(const std::string& path) const;
    static TabularDataset load(const std::string& path);
};

TabularDataset encode(const RawTable& raw, const DatasetSchema& schema, const SplitSpec& split);

}  // namespace tabbench::data
