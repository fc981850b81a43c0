#ifndef SKNAP_IO_HPP
#define SKNAP_IO_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sknap::io {

/// Shortest-round-trip-ish fixed formatting ("%.12g") used for every double
/// in CSV and JSON output, so identical runs emit byte-identical artifacts.
std::string format_double(double value);

/// RFC-4180 field quoting: wrap in quotes when the field contains a comma,
/// quote or newline, doubling embedded quotes.
std::string csv_escape(const std::string& field);

/// Row-oriented CSV emitter with a mandatory header.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out);

    void header(std::span<const std::string> names);
    CsvWriter& field(const std::string& value);
    CsvWriter& field(double value);
    CsvWriter& field(long long value);
    CsvWriter& field(int value) { return field(static_cast<long long>(value)); }
    void end_row();

private:
    std::ostream& out_;
    bool row_started_ = false;
    std::size_t columns_ = 0;
    std::size_t fields_in_row_ = 0;
};

/// Read a whole file; throws std::runtime_error naming the path on failure.
std::string read_file(const std::string& path);

/// Write a whole file; throws std::runtime_error naming the path on failure.
void write_file(const std::string& path, const std::string& text);

} // namespace sknap::io

#endif
