#include "sknap/io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace sknap::io {

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

CsvWriter::CsvWriter(std::ostream& out) : out_(out) {}

void CsvWriter::header(std::span<const std::string> names) {
    if (columns_ != 0) throw std::logic_error("CsvWriter: header already written");
    if (names.empty()) throw std::logic_error("CsvWriter: header must name columns");
    columns_ = names.size();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(names[i]);
    }
    out_ << '\n';
}

CsvWriter& CsvWriter::field(const std::string& value) {
    if (columns_ == 0) throw std::logic_error("CsvWriter: header required before rows");
    if (fields_in_row_ >= columns_) throw std::logic_error("CsvWriter: too many fields in row");
    if (row_started_) out_ << ',';
    out_ << csv_escape(value);
    row_started_ = true;
    ++fields_in_row_;
    return *this;
}

CsvWriter& CsvWriter::field(double value) { return field(format_double(value)); }

CsvWriter& CsvWriter::field(long long value) { return field(std::to_string(value)); }

void CsvWriter::end_row() {
    if (fields_in_row_ != columns_)
        throw std::logic_error("CsvWriter: row has fewer fields than the header");
    out_ << '\n';
    row_started_ = false;
    fields_in_row_ = 0;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << text;
    if (!out) throw std::runtime_error("failed writing file: " + path);
}

} // namespace sknap::io
