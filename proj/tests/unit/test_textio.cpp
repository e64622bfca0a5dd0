#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <limits>

#include "sparseloc/textio.hpp"

using namespace sparseloc;

TEST_CASE("fmt round-trips doubles") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 4.9406564584124654e-324}) {
        const auto s = fmt(x);
        CHECK(std::strtod(s.c_str(), nullptr) == x);
    }
    CHECK(fmt(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(fmt(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(fmt(42) == "42");
    CHECK(fmt(true) == "true");
}

TEST_CASE("csv rows must match the header") {
    Csv csv({"a", "b"});
    csv.row({"1", "2"});
    CHECK(csv.str() == "a,b\n1,2\n");
    CHECK(csv.rows() == 1);
    CHECK_THROWS(csv.row({"1"}));
}

TEST_CASE("sha256 known digests") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}
