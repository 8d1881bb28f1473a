#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "tse/common.hpp"

namespace tse {

// Missing cells are NaN; every finite value is a real observation.
inline double missing_value() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_missing(double v) { return std::isnan(v); }

// Dense row-major matrix of doubles with named columns.
struct FeatureMatrix {
    std::vector<std::string> column_names;
    size_t n_rows = 0;
    std::vector<double> values;  // n_rows * column_names.size()

    size_t n_cols() const { return column_names.size(); }

    static FeatureMatrix with_columns(std::vector<std::string> names) {
        FeatureMatrix m;
        m.column_names = std::move(names);
        return m;
    }

    double at(size_t r, size_t c) const { return values[r * n_cols() + c]; }
    double& at(size_t r, size_t c) { return values[r * n_cols() + c]; }

    // appends one row; must have exactly n_cols() entries
    void add_row(const std::vector<double>& row) {
        if (row.size() != n_cols())
            fail("validation", "row width " + std::to_string(row.size()) +
                                   " != column count " + std::to_string(n_cols()));
        values.insert(values.end(), row.begin(), row.end());
        ++n_rows;
    }

    void append(const FeatureMatrix& other) {
        if (other.column_names != column_names)
            fail("validation", "cannot append feature matrix with different columns");
        values.insert(values.end(), other.values.begin(), other.values.end());
        n_rows += other.n_rows;
    }

    const double* row(size_t r) const { return values.data() + r * n_cols(); }

    // copy with the given columns blanked out (set to missing)
    FeatureMatrix with_columns_nulled(const std::vector<size_t>& cols) const {
        FeatureMatrix m = *this;
        for (size_t r = 0; r < n_rows; ++r)
            for (size_t c : cols) m.at(r, c) = missing_value();
        return m;
    }

    // copy with the given columns removed entirely
    FeatureMatrix without_columns(const std::vector<size_t>& cols) const {
        std::vector<bool> drop(n_cols(), false);
        for (size_t c : cols) drop[c] = true;
        FeatureMatrix m;
        for (size_t c = 0; c < n_cols(); ++c)
            if (!drop[c]) m.column_names.push_back(column_names[c]);
        m.values.reserve(n_rows * m.n_cols());
        for (size_t r = 0; r < n_rows; ++r)
            for (size_t c = 0; c < n_cols(); ++c)
                if (!drop[c]) m.values.push_back(at(r, c));
        m.n_rows = n_rows;
        return m;
    }
};

}  // namespace tse
