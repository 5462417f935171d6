#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace torpde {

/// All numbers in data files carry 17 significant digits so that doubles
/// round-trip losslessly.
inline std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Shortest representation that parses back to the same double.
inline std::string num_shortest(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Flat JSON object writer. Keys appear in insertion order; values are
/// pre-formatted (numbers via num17, strings quoted here).
class FlatJson {
  public:
    void add_number(const std::string& key, double v) { items_.emplace_back(key, num17(v)); }
    void add_int(const std::string& key, long long v) { items_.emplace_back(key, std::to_string(v)); }
    void add_bool(const std::string& key, bool v) { items_.emplace_back(key, v ? "true" : "false"); }
    void add_string(const std::string& key, const std::string& v) {
        std::string esc;
        for (char c : v) {
            if (c == '"' || c == '\\') esc.push_back('\\');
            esc.push_back(c);
        }
        items_.emplace_back(key, "\"" + esc + "\"");
    }

    std::string str() const {
        std::ostringstream os;
        os << "{\n";
        for (std::size_t i = 0; i < items_.size(); ++i) {
            os << "  \"" << items_[i].first << "\": " << items_[i].second;
            if (i + 1 < items_.size()) os << ",";
            os << "\n";
        }
        os << "}\n";
        return os.str();
    }

  private:
    std::vector<std::pair<std::string, std::string>> items_;
};

/// CSV table with a fixed header. Cells are formatted by the caller.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> cells) { rows.push_back(std::move(cells)); }

    std::string str() const {
        std::ostringstream os;
        for (std::size_t i = 0; i < header.size(); ++i) {
            os << header[i];
            if (i + 1 < header.size()) os << ",";
        }
        os << "\n";
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                os << r[i];
                if (i + 1 < r.size()) os << ",";
            }
            os << "\n";
        }
        return os.str();
    }
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
}

}  // namespace torpde
