#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace bubbles {

/// Raised when input data cannot be turned into a valid Series.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a regression window is singular or has zero residual variance.
class DegenerateFit : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Deterministic terms included in a Dickey-Fuller type regression.
enum class DetSpec { none, constant, trend };

inline constexpr int det_terms(DetSpec det) noexcept {
    switch (det) {
        case DetSpec::none: return 0;
        case DetSpec::constant: return 1;
        case DetSpec::trend: return 2;
    }
    return 0;
}

inline std::string to_string(DetSpec det) {
    switch (det) {
        case DetSpec::none: return "none";
        case DetSpec::constant: return "const";
        case DetSpec::trend: return "trend";
    }
    return "const";
}

inline DetSpec det_from_string(std::string_view s) {
    if (s == "none") return DetSpec::none;
    if (s == "const" || s == "constant") return DetSpec::constant;
    if (s == "trend" || s == "constant+trend") return DetSpec::trend;
    throw std::invalid_argument("unknown deterministic specification '" + std::string(s) + "'");
}

/**
 * Ordered real-valued observations y_1..y_T with optional labels.
 *
 * Values are stored 0-based: observation t (1-based, as used in all window
 * arithmetic) lives at index t-1.
 */
class Series {
public:
    Series() = default;

    explicit Series(std::vector<double> values, std::vector<std::string> labels = {},
                    std::string name = {})
        : values_(std::move(values)), labels_(std::move(labels)), name_(std::move(name)) {
        if (values_.size() < 2) throw DataError("fewer than 2 observations");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i]))
                throw DataError("non-finite value at observation " + std::to_string(i + 1));
        }
        if (!labels_.empty() && labels_.size() != values_.size())
            throw DataError("labels length does not match values length");
    }

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return values_[i]; }
    /// 1-based observation access, y_t.
    [[nodiscard]] double at_obs(std::size_t t) const { return values_.at(t - 1); }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
    [[nodiscard]] bool has_labels() const noexcept { return !labels_.empty(); }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }

    /// First differences: element i is y_{i+2} - y_{i+1} (length T-1).
    [[nodiscard]] std::vector<double> differences() const {
        std::vector<double> d(values_.size() - 1);
        for (std::size_t i = 1; i < values_.size(); ++i) d[i - 1] = values_[i] - values_[i - 1];
        return d;
    }

    /// Observations (start, end] as a new series (1-based, half-open).
    [[nodiscard]] Series window(std::size_t start, std::size_t end) const {
        if (end > values_.size() || start >= end)
            throw std::invalid_argument("window out of range");
        std::vector<double> v(values_.begin() + static_cast<std::ptrdiff_t>(start),
                              values_.begin() + static_cast<std::ptrdiff_t>(end));
        std::vector<std::string> l;
        if (has_labels())
            l.assign(labels_.begin() + static_cast<std::ptrdiff_t>(start),
                     labels_.begin() + static_cast<std::ptrdiff_t>(end));
        return Series(std::move(v), std::move(l), name_);
    }

private:
    std::vector<double> values_;
    std::vector<std::string> labels_;
    std::string name_;
};

/// Window (tau1, tau2] with minimum admissible width tau0.
struct WindowSpec {
    double tau1 = 0.0;
    double tau2 = 1.0;
    double tau0 = 0.1;

    void validate() const {
        if (!(tau1 >= 0.0 && tau1 <= 1.0) || !(tau2 > 0.0 && tau2 <= 1.0) ||
            !(tau0 > 0.0 && tau0 < 1.0))
            throw std::invalid_argument("window fractions out of range");
        if (!(tau1 < tau2)) throw std::invalid_argument("tau1 must be below tau2");
        if (tau2 - tau1 < tau0 - 1e-12) throw std::invalid_argument("window narrower than tau0");
    }
};

/**
 * Integer part of tau*T.
 *
 * A 1e-9 slack absorbs binary representation error so that decimal inputs
 * such as 0.29*100 map to 29 rather than 28.
 */
inline std::size_t frac_to_index(double tau, std::size_t T) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("fraction outside [0,1]");
    if (T < 1) throw std::invalid_argument("sample size must be positive");
    const double v = std::floor(tau * static_cast<double>(T) + 1e-9);
    return std::min(static_cast<std::size_t>(v), T);
}

/// Minimum window fraction 0.01 + 1.8/sqrt(T), capped at 1.
inline double default_min_window(std::size_t T) {
    if (T < 4) throw std::invalid_argument("default_min_window requires T >= 4");
    return std::min(1.0, 0.01 + 1.8 / std::sqrt(static_cast<double>(T)));
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '"')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '"'))
        --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            cells.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    cells.push_back(trim(cur));
    return cells;
}

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

/**
 * Which CSV column holds the values: a header name, a 0-based position, or
 * (when empty) the last column.
 */
struct ColumnSpec {
    std::string name;
    std::optional<std::size_t> position;

    static ColumnSpec parse(const std::string& s) {
        ColumnSpec c;
        if (s.empty()) return c;
        if (std::all_of(s.begin(), s.end(), [](char ch) { return ch >= '0' && ch <= '9'; }))
            c.position = static_cast<std::size_t>(std::stoul(s));
        else
            c.name = s;
        return c;
    }
};

/**
 * Reads one value column from a comma-separated file.
 *
 * The header row is optional and detected by the value cell failing to parse.
 * When the file has more than one column the first non-value column supplies
 * labels. Unparseable or empty cells are an error naming the file row.
 */
inline Series load_series(const std::string& path, const ColumnSpec& column = {}) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");

    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        rows.push_back(detail::split_csv_line(line));
        line_numbers.push_back(lineno);
    }
    if (rows.empty()) throw DataError("fewer than 2 observations");

    const std::size_t ncol = rows.front().size();
    std::size_t value_col = ncol - 1;
    bool header = false;

    if (!column.name.empty()) {
        const auto& h = rows.front();
        auto it = std::find(h.begin(), h.end(), column.name);
        if (it == h.end()) throw DataError("column '" + column.name + "' not found in header");
        value_col = static_cast<std::size_t>(it - h.begin());
        header = true;
    } else {
        if (column.position) value_col = *column.position;
        if (value_col >= ncol) throw DataError("column position out of range");
        header = !detail::parse_double(rows.front()[value_col]).has_value();
    }

    std::optional<std::size_t> label_col;
    if (ncol > 1) label_col = value_col == 0 ? 1 : 0;

    std::vector<double> values;
    std::vector<std::string> labels;
    for (std::size_t r = header ? 1 : 0; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        const std::string row_id = std::to_string(line_numbers[r]);
        if (value_col >= cells.size()) throw DataError("missing value at row " + row_id);
        auto v = detail::parse_double(cells[value_col]);
        if (!v)
            throw DataError("non-numeric value '" + cells[value_col] + "' at row " + row_id);
        values.push_back(*v);
        if (label_col) labels.push_back(*label_col < cells.size() ? cells[*label_col] : "");
    }
    if (values.size() < 2) throw DataError("fewer than 2 observations");
    std::string name = header ? rows.front()[value_col] : std::string("y");
    return Series(std::move(values), std::move(labels), std::move(name));
}

/// Writes label,value rows with shortest round-trip formatting.
inline void save_series(const std::string& path, const Series& s) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    const std::string vname = s.name().empty() ? "value" : s.name();
    if (s.has_labels()) out << "label," << vname << '\n';
    else out << vname << '\n';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.has_labels()) out << s.labels()[i] << ',';
        out << detail::format_double(s[i]) << '\n';
    }
}

}  // namespace bubbles
