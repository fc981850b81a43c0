#include <doctest.h>

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sknap/io.hpp"

using namespace sknap;

TEST_CASE("format_double is stable and compact") {
    CHECK(io::format_double(0.33) == "0.33");
    CHECK(io::format_double(0.0) == "0");
    CHECK(io::format_double(-1.5) == "-1.5");
    CHECK(io::format_double(1e300) == "1e+300");
    CHECK(io::format_double(17.5792935751123) == "17.5792935751");
    // identical input, identical bytes
    CHECK(io::format_double(1.0 / 3.0) == io::format_double(1.0 / 3.0));
}

TEST_CASE("csv_escape quotes only when needed") {
    CHECK(io::csv_escape("plain") == "plain");
    CHECK(io::csv_escape("a,b") == "\"a,b\"");
    CHECK(io::csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(io::csv_escape("line\nbreak") == "\"line\nbreak\"");
    CHECK(io::csv_escape("") == "");
}

TEST_CASE("CsvWriter emits rows and enforces the column count") {
    std::ostringstream out;
    io::CsvWriter w(out);
    const std::vector<std::string> names = {"name", "x"};
    w.header(names);
    w.field("a,b").field(2.5);
    w.end_row();
    w.field("c").field(3);
    w.end_row();
    CHECK(out.str() == "name,x\n\"a,b\",2.5\nc,3\n");

    w.field("only-one");
    CHECK_THROWS_AS(w.end_row(), std::logic_error);
}

TEST_CASE("CsvWriter rejects misuse") {
    std::ostringstream out;
    io::CsvWriter w(out);
    CHECK_THROWS_AS(w.field(1.0), std::logic_error); // no header yet
    const std::vector<std::string> names = {"x"};
    w.header(names);
    CHECK_THROWS_AS(w.header(names), std::logic_error); // header twice
    w.field(1.0);
    CHECK_THROWS_AS(w.field(2.0), std::logic_error); // too many fields
}

TEST_CASE("read_file and write_file round-trip and name the path on failure") {
    std::string path = "/tmp/sknap_io_test.txt";
    io::write_file(path, "hello\nworld");
    CHECK(io::read_file(path) == "hello\nworld");
    std::remove(path.c_str());

    try {
        io::read_file("/nonexistent/dir/file.txt");
        CHECK(false);
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("/nonexistent/dir/file.txt") != std::string::npos);
    }
}
