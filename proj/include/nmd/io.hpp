#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace nmd {

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Writes `content` to a temporary sibling and renames it over `path`.
void atomic_write(const std::filesystem::path& path, std::string_view content);

/// Comma-separated table with a header row and LF line endings.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    CsvTable& row(std::vector<std::string> cells);
    std::size_t rows() const noexcept { return rows_.size(); }
    std::string str() const;

    static std::string num(double v) { return format_number(v); }
    /// Quotes a cell when it contains a comma, quote or newline.
    static std::string quote(const std::string& text);

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace nmd
