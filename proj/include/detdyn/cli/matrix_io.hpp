#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "../core.hpp"

namespace detdyn::cli {

using json = nlohmann::json;

/// Shortest-safe decimal form: 17 significant digits always round-trips.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string format_complex(const Complex& z) {
    return format_double(z.real()) + (std::signbit(z.imag()) ? " - " : " + ") + format_double(std::abs(z.imag())) + "i";
}

inline std::string format_matrix_csv(const Matrix& m) {
    std::string out;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    return out;
}

inline std::string format_vector(const Vector& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += format_double(v[i]);
    }
    return out;
}

namespace detail {

inline bool is_blank(char c) { return c == ' ' || c == '\t'; }

/// Parses one decimal literal; the whole cell must be consumed.
inline double parse_cell(std::string_view cell, std::size_t line, std::size_t column) {
    std::size_t b = 0, e = cell.size();
    while (b < e && is_blank(cell[b])) ++b;
    while (e > b && is_blank(cell[e - 1])) --e;
    if (b == e) throw ParseError(line, column, "empty cell");
    const std::size_t literal_col = column + b;
    std::string_view lit = cell.substr(b, e - b);
    std::size_t plus = 0;
    if (lit.front() == '+') {
        lit.remove_prefix(1);
        plus = 1;
    }
    if (lit.empty() || !(std::isdigit(static_cast<unsigned char>(lit.front())) || lit.front() == '.' ||
                         lit.front() == '-'))
        throw ParseError(line, literal_col, "expected a decimal literal");
    double x = 0;
    const auto [ptr, ec] = std::from_chars(lit.data(), lit.data() + lit.size(), x);
    if (ec == std::errc::result_out_of_range) throw ParseError(line, literal_col, "value out of range");
    if (ec != std::errc{}) throw ParseError(line, literal_col, "expected a decimal literal");
    if (ptr != lit.data() + lit.size())
        throw ParseError(line, literal_col + plus + static_cast<std::size_t>(ptr - lit.data()), "unexpected character");
    if (!std::isfinite(x)) throw ParseError(line, literal_col, "non-finite value");
    return x;
}

}  // namespace detail

/// CSV matrix: one row per line, comma separated. LF or CRLF; blank lines
/// are ignored, but at least one row is required.
inline Matrix parse_matrix_csv(std::string_view text) {
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0, first_row_line = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        bool blank = true;
        for (char c : line)
            if (!detail::is_blank(c)) blank = false;
        if (blank) continue;
        std::vector<double> row;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            const std::size_t end = comma == std::string_view::npos ? line.size() : comma;
            row.push_back(detail::parse_cell(line.substr(start, end - start), line_no, start + 1));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (rows.empty()) first_row_line = line_no;
        if (!rows.empty() && row.size() != rows.front().size())
            throw Error(ErrorKind::RaggedRows, "line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                                                   " entries but line " + std::to_string(first_row_line) + " has " +
                                                   std::to_string(rows.front().size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError(line_no + 1, 1, "no matrix rows");
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

/// Array of row arrays. A flat array of numbers is read as a column.
inline Matrix matrix_from_json(const json& j, const std::string& name) {
    if (!j.is_array()) throw Error(ErrorKind::ParseError, "'" + name + "' must be an array of rows");
    if (j.empty()) return Matrix{};
    auto number = [&](const json& x) {
        if (!x.is_number()) throw Error(ErrorKind::ParseError, "'" + name + "' has a non-numeric entry");
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw Error(ErrorKind::NonFinite, "'" + name + "' has a non-finite entry");
        return d;
    };
    if (!j.front().is_array()) {
        Matrix m(j.size(), 1);
        for (std::size_t i = 0; i < j.size(); ++i) m(i, 0) = number(j[i]);
        return m;
    }
    const std::size_t cols = j.front().size();
    Matrix m(j.size(), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_array()) throw Error(ErrorKind::ParseError, "'" + name + "' mixes rows and scalars");
        if (j[i].size() != cols)
            throw Error(ErrorKind::RaggedRows, "'" + name + "' row " + std::to_string(i) + " has " +
                                                   std::to_string(j[i].size()) + " entries, expected " +
                                                   std::to_string(cols));
        for (std::size_t k = 0; k < cols; ++k) m(i, k) = number(j[i][k]);
    }
    return m;
}

inline Vector vector_from_json(const json& j, const std::string& name) {
    if (!j.is_array()) throw Error(ErrorKind::ParseError, "'" + name + "' must be an array of numbers");
    Vector v;
    for (const auto& x : j) {
        if (!x.is_number()) throw Error(ErrorKind::ParseError, "'" + name + "' has a non-numeric entry");
        v.push_back(x.get<double>());
        if (!std::isfinite(v.back())) throw Error(ErrorKind::NonFinite, "'" + name + "' has a non-finite entry");
    }
    return v;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::InvalidArgument, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline bool looks_like_json(std::string_view text) {
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') continue;
        return c == '{' || c == '[';
    }
    return false;
}

inline json parse_json_text(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        // byte offset -> line/column
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError(line, col, "malformed scenario document");
    }
}

/// CSV text, or a structured document that is either a bare array of rows
/// or an object with the matrix under "H" (or "matrix").
inline Matrix parse_matrix_file(const std::string& path) {
    const std::string text = read_text_file(path);
    if (!looks_like_json(text)) return parse_matrix_csv(text);
    const json doc = parse_json_text(text);
    if (doc.is_array()) return matrix_from_json(doc, "matrix");
    for (const char* key : {"H", "matrix", "A", "P", "W"})
        if (doc.contains(key)) return matrix_from_json(doc.at(key), key);
    throw Error(ErrorKind::InvalidArgument, "'" + path + "' does not embed a matrix");
}

}  // namespace detdyn::cli
