#pragma once

// Text formats for forecast anchors and annual arrival distributions.
//
//   anchors:       header line, then `year,cumulative_probability` per line
//   distribution:  header `year,probability`, one line per year 1..S, then
//                  `never,probability`

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "taicap/errors.hpp"
#include "taicap/timeline.hpp"

namespace taicap {

/// Thrown for malformed input text; what() names the line.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& source, int line, const std::string& msg)
        : ConfigError(source + ":" + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline bool split_pair(const std::string& line, std::string& left, std::string& right) {
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) return false;
    left = trim(line.substr(0, comma));
    right = trim(line.substr(comma + 1));
    return !left.empty() && !right.empty();
}

inline bool parse_double(const std::string& s, double& out) {
    std::size_t used = 0;
    try {
        out = std::stod(s, &used);
    } catch (const std::exception&) {
        return false;
    }
    return used == s.size();
}

inline bool parse_int(const std::string& s, int& out) {
    std::size_t used = 0;
    try {
        out = std::stoi(s, &used);
    } catch (const std::exception&) {
        return false;
    }
    return used == s.size();
}

/// Nonblank lines with their 1-based line numbers.
inline std::vector<std::pair<int, std::string>> read_lines(std::istream& in) {
    std::vector<std::pair<int, std::string>> lines;
    std::string raw;
    int number = 0;
    while (std::getline(in, raw)) {
        ++number;
        auto t = trim(raw);
        if (number == 1 && t.rfind("\xEF\xBB\xBF", 0) == 0) t = t.substr(3);
        if (!t.empty()) lines.emplace_back(number, std::move(t));
    }
    return lines;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

}  // namespace detail

inline std::vector<Anchor> parse_anchors(std::istream& in, const std::string& source = "anchors") {
    const auto lines = detail::read_lines(in);
    if (lines.empty()) throw ParseError(source, 1, "empty anchor file (header line required)");
    std::string a, b;
    double dummy = 0.0;
    if (!detail::split_pair(lines[0].second, a, b) || detail::parse_double(a, dummy)) {
        throw ParseError(source, lines[0].first, "expected header `year,cumulative_probability`");
    }
    std::vector<Anchor> anchors;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto& [number, text] = lines[i];
        Anchor an;
        if (!detail::split_pair(text, a, b) || !detail::parse_int(a, an.year) || !detail::parse_double(b, an.cumulative)) {
            throw ParseError(source, number, "expected `year,cumulative_probability`, got `" + text + "`");
        }
        anchors.push_back(an);
    }
    return anchors;
}

inline std::vector<Anchor> read_anchors(const std::string& path) {
    auto in = detail::open_input(path);
    return parse_anchors(in, path);
}

inline ArrivalDistribution parse_distribution(std::istream& in, const std::string& source = "distribution",
                                              std::string label = {}) {
    const auto lines = detail::read_lines(in);
    if (lines.empty()) throw ParseError(source, 1, "empty distribution file");
    std::size_t first = 0;
    std::string a, b;
    int year = 0;
    if (detail::split_pair(lines[0].second, a, b) && a != "never" && !detail::parse_int(a, year)) first = 1;

    std::vector<double> probs;
    double never = -1.0;
    for (std::size_t i = first; i < lines.size(); ++i) {
        const auto& [number, text] = lines[i];
        double p = 0.0;
        if (!detail::split_pair(text, a, b) || !detail::parse_double(b, p)) {
            throw ParseError(source, number, "expected `year,probability`, got `" + text + "`");
        }
        if (never >= 0.0) throw ParseError(source, number, "`never` must be the last line");
        if (a == "never") {
            never = p;
            continue;
        }
        if (!detail::parse_int(a, year) || year != static_cast<int>(probs.size()) + 1) {
            throw ParseError(source, number, "expected year " + std::to_string(probs.size() + 1));
        }
        probs.push_back(p);
    }
    if (never < 0.0) throw ParseError(source, lines.back().first, "missing final `never,probability` line");
    double total = never;
    for (double p : probs) total += p;
    // Written with 17 significant digits the sum is exact to rounding; allow
    // hand-edited files a little slack and absorb it into the never-mass.
    if (std::abs(total - 1.0) > 1e-9) {
        throw ParseError(source, lines.back().first, "probabilities sum to " + std::to_string(total) + ", not 1");
    }
    double inside = 0.0;
    for (double p : probs) inside += p;
    never = 1.0 - inside;
    if (never < 0.0) {
        if (never < -1e-9) throw ParseError(source, lines.back().first, "negative never-mass");
        never = 0.0;
    }
    return ArrivalDistribution(std::move(probs), never, std::move(label));
}

inline ArrivalDistribution read_distribution(const std::string& path, std::string label = {}) {
    auto in = detail::open_input(path);
    return parse_distribution(in, path, std::move(label));
}

inline void write_distribution(std::ostream& out, const ArrivalDistribution& d) {
    char buf[64];
    out << "year,probability\n";
    for (int t = 1; t <= d.horizon(); ++t) {
        std::snprintf(buf, sizeof buf, "%d,%.17g\n", t, d.prob(t));
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "never,%.17g\n", d.p_never());
    out << buf;
}

inline void write_anchors(std::ostream& out, const std::vector<Anchor>& anchors) {
    char buf[64];
    out << "year,cumulative_probability\n";
    for (const auto& an : anchors) {
        std::snprintf(buf, sizeof buf, "%d,%.17g\n", an.year, an.cumulative);
        out << buf;
    }
}

}  // namespace taicap
